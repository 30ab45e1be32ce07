#include "fairrf/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "fairrf/error.hpp"
#include "fairrf/random.hpp"

namespace fairrf {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Splits one CSV record. Double quotes delimit fields that may contain commas;
// "" inside a quoted field is a literal quote.
std::vector<std::string> split_record(std::string_view line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back(trim(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  out.emplace_back(trim(field));
  return out;
}

bool contains(const std::vector<std::string>& v, std::string_view token) {
  return std::find(v.begin(), v.end(), token) != v.end();
}

std::string location(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line);
}

}  // namespace

void TableSchema::validate() const {
  std::set<std::string> seen;
  int labels = 0;
  int sensitive_count = 0;
  for (const auto& f : features) {
    if (f.name.empty()) throw ConfigError("schema: empty feature name");
    if (!seen.insert(f.name).second) throw ConfigError("schema: duplicate feature '" + f.name + "'");
    if (f.role == FeatureRole::Label) ++labels;
    if (f.role == FeatureRole::Sensitive) ++sensitive_count;
  }
  if (labels != 1) throw ConfigError("schema: exactly one label feature required");
  if (sensitive_count > 1) throw ConfigError("schema: at most one sensitive feature allowed");
  if (label.positive.empty()) throw ConfigError("schema: label mapping needs positive values");
  if (input_names().empty()) throw ConfigError("schema: no input features");
}

const FeatureSchema* TableSchema::find(std::string_view name) const {
  for (const auto& f : features) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

std::vector<std::string> TableSchema::input_names() const {
  std::vector<std::string> names;
  for (const auto& f : features) {
    if (f.role == FeatureRole::Input) names.push_back(f.name);
  }
  return names;
}

Dataset Dataset::subset(std::span<const Eigen::Index> rows) const {
  Dataset out;
  out.schema = schema;
  out.group_names = group_names;
  out.columns.reserve(columns.size());
  for (const auto& column : columns) {
    std::visit(
        [&](const auto& values) {
          std::decay_t<decltype(values)> picked;
          picked.reserve(rows.size());
          for (Eigen::Index r : rows) picked.push_back(values[static_cast<std::size_t>(r)]);
          out.columns.emplace_back(std::move(picked));
        },
        column);
  }
  const std::vector<Eigen::Index> idx(rows.begin(), rows.end());
  out.y = y(idx);
  if (s) out.s = Eigen::VectorXi((*s)(idx));
  return out;
}

Dataset load_csv(const std::filesystem::path& path, const TableSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open data file: " + path.string());
  return load_csv(in, schema, path.string());
}

Dataset load_csv(std::istream& in, const TableSchema& schema, const std::string& source_name) {
  schema.validate();

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_record(line);
      break;
    }
  }
  if (header.empty()) throw ParseError(source_name + ": empty file");

  std::vector<std::size_t> source_col(schema.features.size());
  for (std::size_t f = 0; f < schema.features.size(); ++f) {
    const auto it = std::find(header.begin(), header.end(), schema.features[f].name);
    if (it == header.end()) {
      throw ParseError(source_name + ": unknown column '" + schema.features[f].name +
                       "' (not in header)");
    }
    source_col[f] = static_cast<std::size_t>(it - header.begin());
  }

  Dataset out;
  out.schema = schema;
  for (const auto& f : schema.features) {
    if (f.role == FeatureRole::Input && f.kind == FeatureKind::Continuous) {
      out.columns.emplace_back(std::vector<double>{});
    } else {
      out.columns.emplace_back(std::vector<std::string>{});
    }
  }

  std::vector<double> labels;
  std::vector<std::string> sensitive_tokens;
  std::size_t label_index = 0;
  std::optional<std::size_t> sensitive_index;
  for (std::size_t f = 0; f < schema.features.size(); ++f) {
    if (schema.features[f].role == FeatureRole::Label) label_index = f;
    if (schema.features[f].role == FeatureRole::Sensitive) sensitive_index = f;
  }

  std::vector<double> parsed(schema.features.size());
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_record(line);
    if (fields.size() != header.size()) {
      throw ParseError(location(source_name, line_no) + ": expected " +
                       std::to_string(header.size()) + " fields, found " +
                       std::to_string(fields.size()));
    }
    bool missing = false;
    for (std::size_t f = 0; f < schema.features.size(); ++f) {
      if (contains(schema.missing_tokens, fields[source_col[f]])) missing = true;
    }
    if (missing) {
      ++out.dropped_rows;
      continue;
    }
    for (std::size_t f = 0; f < schema.features.size(); ++f) {
      const auto& spec = schema.features[f];
      const std::string& token = fields[source_col[f]];
      if (spec.role == FeatureRole::Input && spec.kind == FeatureKind::Continuous) {
        double value = 0.0;
        const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
        if (ec != std::errc{} || ptr != token.data() + token.size() || !std::isfinite(value)) {
          throw ParseError(location(source_name, line_no) + ": column '" + spec.name +
                           "': cannot parse '" + token + "' as a number");
        }
        parsed[f] = value;
      }
    }
    const std::string& label_token = fields[source_col[label_index]];
    const bool positive = contains(schema.label.positive, label_token);
    if (!positive && !schema.label.negative.empty() &&
        !contains(schema.label.negative, label_token)) {
      throw ParseError(location(source_name, line_no) + ": unmapped label value '" +
                       label_token + "'");
    }
    labels.push_back(positive ? 1.0 : 0.0);

    for (std::size_t f = 0; f < schema.features.size(); ++f) {
      const std::string& token = fields[source_col[f]];
      std::visit(
          [&](auto& values) {
            using T = typename std::decay_t<decltype(values)>::value_type;
            if constexpr (std::is_same_v<T, double>) {
              values.push_back(parsed[f]);
            } else {
              values.push_back(token);
            }
          },
          out.columns[f]);
    }
    if (sensitive_index) sensitive_tokens.push_back(fields[source_col[*sensitive_index]]);
  }

  if (labels.empty()) throw ParseError(source_name + ": no usable rows");
  out.y = Eigen::Map<const Eigen::VectorXd>(labels.data(), static_cast<Eigen::Index>(labels.size()));

  if (sensitive_index) {
    Eigen::VectorXi s(static_cast<Eigen::Index>(sensitive_tokens.size()));
    if (!schema.sensitive.group_one.empty()) {
      out.group_names = {"other", "group_one"};
      for (std::size_t i = 0; i < sensitive_tokens.size(); ++i) {
        s(static_cast<Eigen::Index>(i)) = contains(schema.sensitive.group_one, sensitive_tokens[i]);
      }
    } else {
      std::map<std::string, int> ids;
      for (const auto& t : sensitive_tokens) ids.emplace(t, 0);
      int next = 0;
      for (auto& [name, id] : ids) {
        id = next++;
        out.group_names.push_back(name);
      }
      for (std::size_t i = 0; i < sensitive_tokens.size(); ++i) {
        s(static_cast<Eigen::Index>(i)) = ids.at(sensitive_tokens[i]);
      }
    }
    out.s = std::move(s);
  }
  return out;
}

DataSplit split(const Dataset& dataset, std::array<double, 3> ratios, std::uint64_t seed) {
  for (double r : ratios) {
    if (!(r > 0.0)) throw Error("split: ratios must be positive");
  }
  const Eigen::Index n = dataset.rows();
  if (n < 3) throw Error("split: need at least 3 rows, have " + std::to_string(n));

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng rng(seed);
  rng.shuffle(order);

  const double total = ratios[0] + ratios[1] + ratios[2];
  auto n_train = static_cast<Eigen::Index>(std::llround(static_cast<double>(n) * ratios[0] / total));
  auto n_eval = static_cast<Eigen::Index>(std::llround(static_cast<double>(n) * ratios[1] / total));
  n_train = std::clamp<Eigen::Index>(n_train, 1, n - 2);
  n_eval = std::clamp<Eigen::Index>(n_eval, 1, n - n_train - 1);

  const std::span<const Eigen::Index> all(order);
  DataSplit out;
  out.train = dataset.subset(all.subspan(0, static_cast<std::size_t>(n_train)));
  out.eval = dataset.subset(all.subspan(static_cast<std::size_t>(n_train), static_cast<std::size_t>(n_eval)));
  out.test = dataset.subset(all.subspan(static_cast<std::size_t>(n_train + n_eval)));
  return out;
}

const ColumnGroup& EncodedDataset::group(std::string_view feature) const {
  for (const auto& g : column_map) {
    if (g.feature == feature) return g;
  }
  throw Error("no encoded feature named '" + std::string(feature) + "'");
}

Encoder Encoder::fit(const Dataset& train) {
  Encoder enc;
  const auto& features = train.schema.features;
  const double n = static_cast<double>(train.rows());
  for (std::size_t f = 0; f < features.size(); ++f) {
    if (features[f].role != FeatureRole::Input) continue;
    FeatureCoding coding;
    coding.schema_index = f;
    coding.name = features[f].name;
    coding.kind = features[f].kind;
    coding.begin = enc.width_;
    if (coding.kind == FeatureKind::Categorical) {
      const auto& tokens = std::get<std::vector<std::string>>(train.columns[f]);
      std::map<std::string, std::size_t> counts;
      for (const auto& t : tokens) ++counts[t];
      for (const auto& [level, count] : counts) {
        // A level present in every row gives a constant column.
        if (count == tokens.size()) continue;
        coding.vocabulary.push_back(level);
        enc.column_names_.push_back(coding.name + "=" + level);
      }
      coding.count = static_cast<Eigen::Index>(coding.vocabulary.size());
    } else {
      const auto& values = std::get<std::vector<double>>(train.columns[f]);
      const Eigen::Map<const Eigen::VectorXd> v(values.data(), static_cast<Eigen::Index>(values.size()));
      coding.mean = v.mean();
      coding.sd = std::sqrt((v.array() - coding.mean).square().sum() / n);
      const double scale = std::max(1.0, v.cwiseAbs().maxCoeff());
      coding.dropped = !(coding.sd > 1e-12 * scale);
      coding.count = coding.dropped ? 0 : 1;
      if (!coding.dropped) enc.column_names_.push_back(coding.name);
    }
    enc.width_ += coding.count;
    enc.features_.push_back(std::move(coding));
  }
  return enc;
}

EncodedDataset Encoder::transform(const Dataset& data) const {
  const Eigen::Index n = data.rows();
  EncodedDataset out;
  out.data.X = Eigen::MatrixXd::Zero(n, width_);
  out.data.y = data.y;
  out.s = data.s;
  out.group_names = data.group_names;
  out.column_names = column_names_;
  for (const auto& coding : features_) {
    out.column_map.push_back({coding.name, coding.begin, coding.count});
    if (coding.count == 0) continue;
    const auto& column = data.columns.at(coding.schema_index);
    if (coding.kind == FeatureKind::Categorical) {
      const auto& tokens = std::get<std::vector<std::string>>(column);
      std::unordered_map<std::string_view, Eigen::Index> slot;
      for (std::size_t k = 0; k < coding.vocabulary.size(); ++k) {
        slot.emplace(coding.vocabulary[k], static_cast<Eigen::Index>(k));
      }
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto it = slot.find(tokens[static_cast<std::size_t>(i)]);
        if (it != slot.end()) out.data.X(i, coding.begin + it->second) = 1.0;
      }
    } else {
      const auto& values = std::get<std::vector<double>>(column);
      for (Eigen::Index i = 0; i < n; ++i) {
        out.data.X(i, coding.begin) = (values[static_cast<std::size_t>(i)] - coding.mean) / coding.sd;
      }
    }
  }
  return out;
}

std::vector<EncodedDataset> encode(const Dataset& train, std::span<const Dataset> others) {
  const Encoder enc = Encoder::fit(train);
  std::vector<EncodedDataset> out;
  out.reserve(others.size() + 1);
  out.push_back(enc.transform(train));
  for (const auto& d : others) out.push_back(enc.transform(d));
  return out;
}

bool on_simplex(const Eigen::VectorXd& w, double tol) {
  return w.size() > 0 && (w.array() >= -tol).all() && std::abs(w.sum() - 1.0) <= tol;
}

RelatedFeatureSet resolve_related(const TableSchema& schema, const EncodedDataset& encoded,
                                  std::span<const std::string> names,
                                  std::optional<Eigen::VectorXd> lambda0) {
  if (names.empty()) throw Error("related feature list is empty");
  RelatedFeatureSet out;
  std::set<std::string> seen;
  for (const auto& name : names) {
    const FeatureSchema* f = schema.find(name);
    if (f == nullptr) throw Error("related feature '" + name + "' not in schema");
    if (f->role != FeatureRole::Input) {
      throw Error("related feature '" + name + "' is the label or sensitive column");
    }
    if (!seen.insert(name).second) throw Error("related feature '" + name + "' listed twice");
    const ColumnGroup& g = encoded.group(name);
    if (g.count == 0) throw Error("related feature '" + name + "' has no non-constant columns");
    std::vector<Eigen::Index> cols(static_cast<std::size_t>(g.count));
    for (Eigen::Index c = 0; c < g.count; ++c) cols[static_cast<std::size_t>(c)] = g.begin + c;
    out.features.push_back(name);
    out.column_groups.push_back(std::move(cols));
  }
  const auto k = out.size();
  if (lambda0) {
    if (lambda0->size() != k) throw Error("lambda0 has wrong length");
    if (!on_simplex(*lambda0)) throw Error("lambda0 must lie on the probability simplex");
    out.lambda0 = *lambda0;
  } else {
    out.lambda0 = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
  }
  return out;
}

}  // namespace fairrf
