#pragma once
// Ordered feature descriptors shared by the neural and tree paths, plus the
// encoders that turn validated records into model inputs.

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "bgtf/data.hpp"

namespace bgtf {

enum class FeatureKind { Numeric, Categorical };

struct FeatureDesc {
  std::string name;
  FeatureKind kind = FeatureKind::Numeric;
  std::vector<std::string> vocab;  // categorical only; dense codes 0..V-1

  bool operator==(const FeatureDesc&) const = default;
};

// The feature order is part of the model: the BiGRU consumes tokens in this
// order and the order is serialized with every checkpoint.
struct FeatureSpec {
  std::vector<FeatureDesc> features;

  std::size_t count() const { return features.size(); }

  // Canonical order: task_type, model_arch, input_dim, batch_size,
  // num_layers, num_parameters, precision_encoded, parameters_per_layer.
  // model_arch vocabulary is open: collected (sorted) from the dataset.
  static FeatureSpec canonical(const std::vector<TaskRecord>& records) {
    std::set<std::string> archs;
    for (const TaskRecord& r : records) archs.insert(r.model_arch);
    FeatureSpec s;
    s.features = {
        {"task_type", FeatureKind::Categorical, {"training", "inference"}},
        {"model_arch", FeatureKind::Categorical, {archs.begin(), archs.end()}},
        {"input_dim", FeatureKind::Numeric, {}},
        {"batch_size", FeatureKind::Numeric, {}},
        {"num_layers", FeatureKind::Numeric, {}},
        {"num_parameters", FeatureKind::Numeric, {}},
        {"precision_encoded", FeatureKind::Categorical, {"0", "1", "2"}},
        {"parameters_per_layer", FeatureKind::Numeric, {}},
    };
    return s;
  }

  std::size_t vocab_index(const FeatureDesc& f, const std::string& value) const {
    for (std::size_t i = 0; i < f.vocab.size(); ++i)
      if (f.vocab[i] == value) return i;
    throw VocabError("feature '" + f.name + "': unknown category '" + value + "'");
  }

  bool operator==(const FeatureSpec&) const = default;
};

inline std::string categorical_feature_value(const TaskRecord& r, const std::string& name) {
  if (name == "task_type") return r.task_type;
  if (name == "model_arch") return r.model_arch;
  if (name == "precision_encoded") return std::to_string(r.precision_encoded);
  throw SchemaError("unknown categorical feature '" + name + "'");
}

// One record encoded for the neural path: standardized values for numeric
// features, vocabulary codes for categorical ones, aligned with the spec.
struct EncodedRecord {
  std::vector<double> numeric_z;   // per feature; 0 where categorical
  std::vector<std::size_t> code;   // per feature; 0 where numeric
};

inline EncodedRecord encode_record(const TaskRecord& r, const FeatureSpec& spec,
                                   const Scaler& scaler) {
  EncodedRecord enc;
  enc.numeric_z.assign(spec.count(), 0.0);
  enc.code.assign(spec.count(), 0);
  for (std::size_t f = 0; f < spec.count(); ++f) {
    const FeatureDesc& desc = spec.features[f];
    if (desc.kind == FeatureKind::Numeric) {
      std::size_t k = 0;
      while (k < scaler.feature_names.size() && scaler.feature_names[k] != desc.name) ++k;
      if (k == scaler.feature_names.size())
        throw SchemaError("scaler does not cover numeric feature '" + desc.name + "'");
      enc.numeric_z[f] = scaler.transform_feature(k, numeric_feature_value(r, desc.name));
    } else {
      enc.code[f] = spec.vocab_index(desc, categorical_feature_value(r, desc.name));
    }
  }
  return enc;
}

// ---------------------------------------------------------------------------
// Tree-path design matrix: standardized numerics, integer codes for task_type
// and precision_encoded, one-hot columns for the open model_arch vocabulary.
// ---------------------------------------------------------------------------

struct DesignMatrix {
  std::vector<std::vector<double>> rows;
  std::vector<double> targets;  // original MB units
  std::vector<std::string> column_names;
};

inline DesignMatrix tree_design_matrix(const std::vector<TaskRecord>& records,
                                       const std::vector<std::size_t>& indices,
                                       const FeatureSpec& spec, const Scaler& scaler) {
  DesignMatrix m;
  for (const FeatureDesc& desc : spec.features) {
    if (desc.kind == FeatureKind::Numeric) {
      m.column_names.push_back(desc.name + "_z");
    } else if (desc.name == "model_arch") {
      for (const std::string& arch : desc.vocab) m.column_names.push_back("model_arch=" + arch);
    } else {
      m.column_names.push_back(desc.name + "_code");
    }
  }
  for (std::size_t i : indices) {
    const TaskRecord& r = records[i];
    std::vector<double> row;
    row.reserve(m.column_names.size());
    for (const FeatureDesc& desc : spec.features) {
      if (desc.kind == FeatureKind::Numeric) {
        std::size_t k = 0;
        while (k < scaler.feature_names.size() && scaler.feature_names[k] != desc.name) ++k;
        if (k == scaler.feature_names.size())
          throw SchemaError("scaler does not cover numeric feature '" + desc.name + "'");
        row.push_back(scaler.transform_feature(k, numeric_feature_value(r, desc.name)));
      } else if (desc.name == "model_arch") {
        const std::size_t code = spec.vocab_index(desc, r.model_arch);
        for (std::size_t v = 0; v < desc.vocab.size(); ++v) row.push_back(v == code ? 1.0 : 0.0);
      } else {
        row.push_back(static_cast<double>(
            spec.vocab_index(desc, categorical_feature_value(r, desc.name))));
      }
    }
    m.rows.push_back(std::move(row));
    m.targets.push_back(r.memory_usage_mb);
  }
  return m;
}

}  // namespace bgtf
