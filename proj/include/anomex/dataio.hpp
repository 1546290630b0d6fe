#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "anomex/network.hpp"
#include "json.hpp"

namespace anomex {

// ISO 8601 UTC instant. The original text is kept so reports echo it verbatim.
struct Timestamp {
  std::string text;
  std::int64_t epoch_ms = 0;

  bool operator==(const Timestamp&) const = default;
};

Timestamp parse_timestamp(std::string_view text);

// Raw header + cells, before any typing.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based file line of each row
};

CsvTable read_csv_table(std::istream& in);

double parse_cell(std::string_view cell, std::size_t row, std::size_t column);

// Fixed-width telemetry: named dimensions, one value vector per row, optional
// per-row timestamps.
class Dataset {
 public:
  Dataset(std::vector<std::string> names, RowMatrixXd values,
          std::vector<Timestamp> timestamps = {}, std::string provenance = {});

  Eigen::Index dims() const { return values_.cols(); }
  Eigen::Index rows() const { return values_.rows(); }
  const std::vector<std::string>& names() const { return names_; }
  const RowMatrixXd& values() const { return values_; }
  Eigen::VectorXd row(Eigen::Index i) const { return values_.row(i).transpose(); }
  bool has_timestamps() const { return !timestamps_.empty(); }
  const std::vector<Timestamp>& timestamps() const { return timestamps_; }
  const std::string& provenance() const { return provenance_; }

 private:
  std::vector<std::string> names_;
  RowMatrixXd values_;
  std::vector<Timestamp> timestamps_;
  std::string provenance_;
};

Dataset load_telemetry(const std::filesystem::path& path);
Dataset parse_telemetry(std::istream& in, const std::string& source = "<stream>");

// Reorders/projects columns by name; missing names are a ShapeError.
Dataset select_columns(const Dataset& data, const std::vector<std::string>& names);

// Writes values with shortest round-trip formatting.
void write_telemetry(std::ostream& out, const Dataset& data);

std::string format_number(double value);

// Per-dimension min-max scaling into [0,1] fitted on training data.
class Normalizer {
 public:
  Normalizer(Eigen::VectorXd min, Eigen::VectorXd max, std::vector<std::string> names = {});

  Eigen::Index dims() const { return min_.size(); }
  const Eigen::VectorXd& min() const { return min_; }
  const Eigen::VectorXd& max() const { return max_; }
  const std::vector<std::string>& names() const { return names_; }

  // Dimensions carrying no information (min == max); they map to 0.5.
  std::vector<Eigen::Index> constant_dims() const;

  // y_d = clamp((x_d - min_d) / (max_d - min_d), 0, 1).
  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& raw) const;
  RowMatrixXd apply_rows(const RowMatrixXd& raw) const;
  Eigen::VectorXd invert(const Eigen::Ref<const Eigen::VectorXd>& normalized) const;

  bool operator==(const Normalizer& other) const {
    return names_ == other.names_ && min_.size() == other.min_.size() &&
           max_.size() == other.max_.size() && min_ == other.min_ && max_ == other.max_;
  }

 private:
  Eigen::VectorXd min_;
  Eigen::VectorXd max_;
  std::vector<std::string> names_;
};

Normalizer fit_normalizer(const Dataset& data);

Dataset normalize(const Normalizer& norm, const Dataset& data);

nlohmann::json normalizer_to_json(const Normalizer& norm);
Normalizer normalizer_from_json(const nlohmann::json& doc);

nlohmann::json vector_to_json(const Eigen::Ref<const Eigen::VectorXd>& v);
Eigen::VectorXd vector_from_json(const nlohmann::json& doc);

}  // namespace anomex
