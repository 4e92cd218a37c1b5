#include "plam/dataset.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace plam {

std::string to_string(VarKind k) {
    switch (k) {
        case VarKind::Continuous: return "continuous";
        case VarKind::Binary: return "binary";
        case VarKind::Excluded: return "excluded";
    }
    return "?";
}

VarKind var_kind_from_string(const std::string& s) {
    if (s == "continuous") return VarKind::Continuous;
    if (s == "binary") return VarKind::Binary;
    if (s == "excluded") return VarKind::Excluded;
    throw std::invalid_argument("unknown variable kind: " + s);
}

Dataset::Dataset(std::vector<std::string> names, Eigen::MatrixXd values, int target_idx,
                 std::vector<VarKind> kinds, std::string provenance)
    : names_(std::move(names)),
      values_(std::move(values)),
      target_idx_(target_idx),
      kinds_(std::move(kinds)),
      provenance_(std::move(provenance)) {
    if (names_.size() != size_t(values_.cols()) || kinds_.size() != names_.size())
        throw std::invalid_argument("Dataset: inconsistent column metadata");
    if (target_idx_ < 0 || target_idx_ >= int(names_.size()))
        throw MissingTarget("target index out of range");
}

int Dataset::column_index(const std::string& name) const {
    for (size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return int(i);
    return -1;
}

std::vector<int> Dataset::feature_indices() const {
    std::vector<int> out;
    out.reserve(names_.size() - 1);
    for (int i = 0; i < int(names_.size()); ++i)
        if (i != target_idx_) out.push_back(i);
    return out;
}

std::uint64_t Dataset::schema_fingerprint() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const std::string& s) {
        for (char c : s) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ULL;
        }
        h ^= 0xff;
        h *= 1099511628211ULL;
    };
    for (size_t i = 0; i < names_.size(); ++i) {
        mix(names_[i]);
        mix(to_string(kinds_[i]));
    }
    mix(names_[size_t(target_idx_)]);
    return h;
}

Dataset Dataset::subset_rows(const std::vector<int>& rows) const {
    Eigen::MatrixXd v(rows.size(), values_.cols());
    for (size_t i = 0; i < rows.size(); ++i) v.row(Eigen::Index(i)) = values_.row(rows[i]);
    return Dataset(names_, std::move(v), target_idx_, kinds_, provenance_);
}

Dataset Dataset::with_target(const Eigen::VectorXd& new_target) const {
    if (new_target.size() != values_.rows())
        throw LengthMismatch("replacement target length differs from row count");
    Eigen::MatrixXd v = values_;
    v.col(target_idx_) = new_target;
    return Dataset(names_, std::move(v), target_idx_, kinds_, provenance_);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

bool parse_double(const std::string& s, double& out) {
    const char* b = s.data();
    const char* e = s.data() + s.size();
    while (b < e && (*b == ' ' || *b == '\t')) ++b;
    while (e > b && (*(e - 1) == ' ' || *(e - 1) == '\t')) --e;
    if (b == e) return false;
    auto [p, ec] = std::from_chars(b, e, out);
    return ec == std::errc() && p == e;
}

}  // namespace

Dataset ingest_csv(const std::string& path, const std::string& target,
                   const std::map<std::string, VarKind>& kind_overrides, IngestReport* report) {
    std::ifstream in(path);
    if (!in) throw EmptyFile("cannot open " + path);

    std::string line;
    if (!std::getline(in, line) || line.empty()) throw EmptyFile(path + " has no header row");
    const std::vector<std::string> names = split_csv_line(line);
    const size_t m = names.size();

    int target_idx = -1;
    for (size_t i = 0; i < m; ++i)
        if (names[i] == target) target_idx = int(i);
    if (target_idx < 0) throw MissingTarget("column '" + target + "' not found in " + path);

    std::vector<std::vector<double>> rows;
    int rejected = 0;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != m)
            throw NonNumericCell("row " + std::to_string(line_no) + ": expected " +
                                 std::to_string(m) + " cells, got " + std::to_string(cells.size()));
        std::vector<double> vals(m);
        bool missing = false;
        for (size_t j = 0; j < m; ++j) {
            if (cells[j].empty() || cells[j] == "NA" || cells[j] == "nan") {
                missing = true;
                break;
            }
            if (!parse_double(cells[j], vals[j]))
                throw NonNumericCell("row " + std::to_string(line_no) + ", column " + names[j] +
                                     ": '" + cells[j] + "'");
        }
        if (missing) {
            ++rejected;
            continue;
        }
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw EmptyFile(path + " has no data rows");

    Eigen::MatrixXd values(rows.size(), m);
    for (size_t i = 0; i < rows.size(); ++i)
        for (size_t j = 0; j < m; ++j) values(Eigen::Index(i), Eigen::Index(j)) = rows[i][j];

    Warnings warnings;
    std::vector<VarKind> kinds(m, VarKind::Continuous);
    for (size_t j = 0; j < m; ++j) {
        std::set<double> distinct;
        for (Eigen::Index i = 0; i < values.rows() && distinct.size() < 3; ++i)
            distinct.insert(values(i, Eigen::Index(j)));
        if (distinct.size() == 1) {
            kinds[j] = VarKind::Excluded;
            warnings.push_back({"ConstantColumn", names[j] + " is constant; kind set to excluded"});
        } else if (distinct.size() == 2) {
            kinds[j] = VarKind::Binary;
        }
        auto it = kind_overrides.find(names[j]);
        if (it != kind_overrides.end()) {
            kinds[j] = it->second;
            warnings.push_back({"KindOverride", names[j] + " -> " + to_string(it->second)});
        }
    }

    if (report) {
        report->rows_rejected = rejected;
        report->warnings = warnings;
    }
    std::ostringstream prov;
    prov << path << " (" << rows.size() << " rows)";
    return Dataset(names, std::move(values), target_idx, std::move(kinds), prov.str());
}

}  // namespace plam
