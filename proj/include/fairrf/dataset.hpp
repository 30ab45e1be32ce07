#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace fairrf {

enum class FeatureKind { Categorical, Continuous };
enum class FeatureRole { Input, Label, Sensitive };

struct FeatureSchema {
  std::string name;
  FeatureKind kind = FeatureKind::Continuous;
  FeatureRole role = FeatureRole::Input;
};

struct LabelMapping {
  std::vector<std::string> positive;
  /// When non-empty, label tokens outside positive and negative are parse errors.
  std::vector<std::string> negative;
};

struct SensitiveMapping {
  /// Tokens mapped to group 1, everything else to group 0. When empty, each
  /// distinct token becomes its own group (ids in sorted token order).
  std::vector<std::string> group_one;
};

struct TableSchema {
  std::vector<FeatureSchema> features;
  LabelMapping label;
  SensitiveMapping sensitive;
  std::vector<std::string> missing_tokens{"", "?", "NA"};

  /// Throws ConfigError unless there is exactly one label and at most one
  /// sensitive feature, names are unique and a positive label value is given.
  void validate() const;
  const FeatureSchema* find(std::string_view name) const;
  std::vector<std::string> input_names() const;
};

/// Raw values of one schema column: tokens for categorical, label and
/// sensitive columns, parsed numbers for continuous inputs.
using RawColumn = std::variant<std::vector<std::string>, std::vector<double>>;

struct Dataset {
  TableSchema schema;
  std::vector<RawColumn> columns;  // aligned with schema.features
  Eigen::VectorXd y;               // 0/1
  std::optional<Eigen::VectorXi> s;
  std::vector<std::string> group_names;  // name of each sensitive group id
  std::size_t dropped_rows = 0;

  Eigen::Index rows() const { return y.size(); }
  Dataset subset(std::span<const Eigen::Index> rows) const;
};

/// Reads a comma-separated file whose first row is a header. Columns not in
/// the schema are ignored; rows with a missing token in any schema column are
/// dropped and counted in dropped_rows.
Dataset load_csv(const std::filesystem::path& path, const TableSchema& schema);
Dataset load_csv(std::istream& in, const TableSchema& schema, const std::string& source_name);

struct DataSplit {
  Dataset train;
  Dataset eval;
  Dataset test;
};

/// Seeded shuffle, then contiguous partition with sizes round(n * r_i / sum r).
DataSplit split(const Dataset& dataset, std::array<double, 3> ratios, std::uint64_t seed);

struct ColumnGroup {
  std::string feature;
  Eigen::Index begin = 0;
  Eigen::Index count = 0;
};

/// Everything the training path may see. There is deliberately no sensitive
/// attribute here.
struct LabeledData {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;

  Eigen::Index rows() const { return X.rows(); }
};

struct EncodedDataset {
  LabeledData data;
  std::optional<Eigen::VectorXi> s;  // evaluation only
  std::vector<std::string> group_names;
  std::vector<ColumnGroup> column_map;  // one entry per input feature, schema order
  std::vector<std::string> column_names;

  const ColumnGroup& group(std::string_view feature) const;
};

/// One-hot vocabularies and z-score statistics fitted on a training table.
class Encoder {
 public:
  static Encoder fit(const Dataset& train);

  /// Unseen categories encode as all zeros within their group.
  EncodedDataset transform(const Dataset& data) const;

  Eigen::Index width() const { return width_; }
  const std::vector<std::string>& column_names() const { return column_names_; }

 private:
  struct FeatureCoding {
    std::size_t schema_index = 0;
    std::string name;
    FeatureKind kind = FeatureKind::Continuous;
    std::vector<std::string> vocabulary;  // categorical, kept (non-constant) levels
    double mean = 0.0;
    double sd = 1.0;
    bool dropped = false;  // continuous with zero training variance
    Eigen::Index begin = 0;
    Eigen::Index count = 0;
  };
  std::vector<FeatureCoding> features_;
  std::vector<std::string> column_names_;
  Eigen::Index width_ = 0;
};

/// Fits on train and encodes train followed by every entry of others.
std::vector<EncodedDataset> encode(const Dataset& train, std::span<const Dataset> others);

struct RelatedFeatureSet {
  std::vector<std::string> features;
  std::vector<std::vector<Eigen::Index>> column_groups;  // encoded column indices
  Eigen::VectorXd lambda0;

  Eigen::Index size() const { return static_cast<Eigen::Index>(features.size()); }
};

/// lambda0 defaults to uniform 1/K.
RelatedFeatureSet resolve_related(const TableSchema& schema, const EncodedDataset& encoded,
                                  std::span<const std::string> names,
                                  std::optional<Eigen::VectorXd> lambda0 = std::nullopt);

/// True when all entries are >= 0 and they sum to 1 within tol.
bool on_simplex(const Eigen::VectorXd& w, double tol = 1e-10);

}  // namespace fairrf
