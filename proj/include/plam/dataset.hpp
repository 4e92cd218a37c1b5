#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "plam/errors.hpp"

namespace plam {

enum class VarKind { Continuous, Binary, Excluded };

std::string to_string(VarKind k);
VarKind var_kind_from_string(const std::string& s);

// Column-labeled numeric table with a designated target.
// Kind semantics: Binary and Excluded columns never receive power terms or
// smooth terms; they still enter linear blocks and interactions.
class Dataset {
public:
    Dataset() = default;
    Dataset(std::vector<std::string> names, Eigen::MatrixXd values, int target_idx,
            std::vector<VarKind> kinds, std::string provenance = {});

    Eigen::Index n_rows() const { return values_.rows(); }
    Eigen::Index n_cols() const { return values_.cols(); }
    const std::vector<std::string>& names() const { return names_; }
    const Eigen::MatrixXd& values() const { return values_; }
    int target_index() const { return target_idx_; }
    const std::string& target_name() const { return names_[size_t(target_idx_)]; }
    VarKind kind(int col) const { return kinds_[size_t(col)]; }
    const std::vector<VarKind>& kinds() const { return kinds_; }
    const std::string& provenance() const { return provenance_; }

    Eigen::VectorXd target() const { return values_.col(target_idx_); }
    Eigen::VectorXd column(int col) const { return values_.col(col); }
    int column_index(const std::string& name) const;  // -1 if absent

    // Feature columns = all columns except the target, in file order.
    std::vector<int> feature_indices() const;

    // Stable hash of names+kinds+target; prediction rejects mismatched schemas.
    std::uint64_t schema_fingerprint() const;

    Dataset subset_rows(const std::vector<int>& rows) const;
    Dataset with_target(const Eigen::VectorXd& new_target) const;

private:
    std::vector<std::string> names_;
    Eigen::MatrixXd values_;
    int target_idx_ = -1;
    std::vector<VarKind> kinds_;
    std::string provenance_;
};

struct IngestReport {
    int rows_rejected = 0;   // rows with missing cells
    Warnings warnings;       // constant columns, kind overrides applied
};

// Reads a comma-separated file with a header row. Kinds are auto-inferred
// (exactly two distinct values -> Binary, one -> Excluded) unless overridden.
Dataset ingest_csv(const std::string& path, const std::string& target,
                   const std::map<std::string, VarKind>& kind_overrides = {},
                   IngestReport* report = nullptr);

}  // namespace plam
