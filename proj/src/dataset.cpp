#include "gcs/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gcs/errors.hpp"
#include "gcs/rng.hpp"

namespace gcs {

namespace {
constexpr double kSimplexTol = 1e-12;
}

SimplexVector SimplexVector::checked(std::vector<double> p) {
    if (p.empty()) throw NumericError("SimplexVector: empty");
    double sum = 0.0;
    for (double v : p) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw NumericError("SimplexVector: negative or non-finite entry");
        sum += v;
    }
    if (std::abs(sum - 1.0) > kSimplexTol)
        throw NumericError("SimplexVector: entries sum to " + std::to_string(sum));
    return SimplexVector{std::move(p)};
}

SimplexVector SimplexVector::from_unnormalized(std::vector<double> p) {
    double sum = 0.0;
    for (double v : p) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw NumericError("SimplexVector: negative or non-finite entry");
        sum += v;
    }
    if (!(sum > 0.0)) throw NumericError("SimplexVector: zero mass");
    for (double& v : p) v /= sum;
    return SimplexVector{std::move(p)};
}

SimplexVector SimplexVector::uniform(std::size_t k) {
    return SimplexVector{std::vector<double>(k, 1.0 / static_cast<double>(k))};
}

ScalingSpec ScalingSpec::unit(std::size_t d) {
    return ScalingSpec{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
}

Dataset::Dataset(Matrix f, std::optional<std::vector<int>> y, int k_classes)
    : features(std::move(f)), labels(std::move(y)), k(k_classes) {
    if (n() < 1) throw DataError("Dataset: needs at least one row");
    if (d() < 1) throw DataError("Dataset: needs at least one feature");
    if (k < 2) throw DataError("Dataset: k must be >= 2");
    if (labels) {
        if (labels->size() != n()) throw DataError("Dataset: label count mismatch");
        for (int y_i : *labels)
            if (y_i < 1 || y_i > k)
                throw DataError("Dataset: label out of range {1.." + std::to_string(k) + "}");
    }
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string trimmed(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_real(const std::string& cell, std::size_t line_no, const std::string& col) {
    const std::string t = trimmed(cell);
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(t, &pos);
    } catch (const std::exception&) {
        throw DataError("non-numeric cell '" + cell + "' in column " + col + " at line " +
                        std::to_string(line_no));
    }
    if (pos != t.size())
        throw DataError("non-numeric cell '" + cell + "' in column " + col + " at line " +
                        std::to_string(line_no));
    return v;
}

} // namespace

Dataset load_csv(const std::filesystem::path& path,
                 std::optional<std::string> label_column,
                 std::optional<int> k_override) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path.string());

    std::string header;
    if (!std::getline(in, header)) throw DataError("empty file: " + path.string());
    if (!header.empty() && header.back() == '\r') header.pop_back();

    const auto columns = split_line(header);
    std::ptrdiff_t label_idx = -1;
    if (label_column) {
        for (std::size_t j = 0; j < columns.size(); ++j)
            if (trimmed(columns[j]) == *label_column) label_idx = static_cast<std::ptrdiff_t>(j);
        if (label_idx < 0)
            throw DataError("label column '" + *label_column + "' not found in " + path.string());
    }
    const std::size_t d = columns.size() - (label_idx >= 0 ? 1 : 0);
    if (d < 1) throw DataError("no feature columns in " + path.string());

    std::vector<double> values;
    std::vector<int> labels;
    std::string line;
    std::size_t line_no = 1;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trimmed(line).empty()) continue;
        const auto cells = split_line(line);
        if (cells.size() != columns.size())
            throw DataError("row with " + std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(columns.size()) + " at line " + std::to_string(line_no));
        for (std::size_t j = 0; j < cells.size(); ++j) {
            const double v = parse_real(cells[j], line_no, trimmed(columns[j]));
            if (static_cast<std::ptrdiff_t>(j) == label_idx) {
                const double r = std::round(v);
                if (std::abs(v - r) > 1e-9 || r < 1.0)
                    throw DataError("label out of range at line " + std::to_string(line_no));
                labels.push_back(static_cast<int>(r));
            } else {
                values.push_back(v);
            }
        }
        ++n;
    }
    if (n == 0) throw DataError("empty file (no data rows): " + path.string());

    int k = 2;
    if (label_idx >= 0) {
        const int max_label = *std::max_element(labels.begin(), labels.end());
        k = k_override.value_or(std::max(max_label, 2));
        if (max_label > k) throw DataError("label out of range: found " + std::to_string(max_label) +
                                           " with k=" + std::to_string(k));
    } else if (k_override) {
        k = *k_override;
    }

    Matrix f(n, d);
    f.data = std::move(values);
    std::optional<std::vector<int>> y;
    if (label_idx >= 0) y = std::move(labels);
    return Dataset(std::move(f), std::move(y), k);
}

ScalingSpec fit_scaling(const Dataset& data) {
    const std::size_t d = data.d();
    ScalingSpec spec;
    spec.mins.assign(d, 0.0);
    spec.maxs.assign(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        double lo = data.features(0, j);
        double hi = lo;
        for (std::size_t i = 1; i < data.n(); ++i) {
            lo = std::min(lo, data.features(i, j));
            hi = std::max(hi, data.features(i, j));
        }
        spec.mins[j] = lo;
        spec.maxs[j] = hi;
    }
    return spec;
}

Dataset apply_scaling(const Dataset& data, const ScalingSpec& spec) {
    if (spec.dim() != data.d()) throw DataError("apply_scaling: dimension mismatch");
    Matrix f(data.n(), data.d());
    for (std::size_t j = 0; j < data.d(); ++j) {
        const double lo = spec.mins[j];
        const double range = spec.maxs[j] - lo;
        for (std::size_t i = 0; i < data.n(); ++i) {
            double v;
            if (range > 0.0) {
                v = (data.features(i, j) - lo) / range;
                v = std::clamp(v, 0.0, 1.0);
            } else {
                v = 0.5; // constant column
            }
            f(i, j) = v;
        }
    }
    return Dataset(std::move(f), data.labels, data.k);
}

SimplexVector class_proportions(const Dataset& data) {
    if (!data.has_labels()) throw DataError("class_proportions: labels absent");
    std::vector<double> counts(static_cast<std::size_t>(data.k), 0.0);
    for (int y : *data.labels) counts[static_cast<std::size_t>(y - 1)] += 1.0;
    for (double& c : counts) c /= static_cast<double>(data.n());
    return SimplexVector::checked(std::move(counts));
}

Dataset subset(const Dataset& data, const std::vector<std::size_t>& rows) {
    if (rows.empty()) throw DataError("subset: empty row selection");
    Matrix f(rows.size(), data.d());
    std::optional<std::vector<int>> y;
    if (data.has_labels()) y.emplace();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto src = data.x(rows[i]);
        std::copy(src.begin(), src.end(), f.row(i).begin());
        if (y) y->push_back(data.label(rows[i]));
    }
    return Dataset(std::move(f), std::move(y), data.k);
}

std::pair<Dataset, Dataset> split(const Dataset& data, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw ConfigError("split: fraction must lie in (0,1)");
    if (data.n() < 2) throw DataError("split: needs at least two rows");

    RngStream rng(derive_seed(seed, "split"));
    const auto perm = shuffled_indices(data.n(), rng);
    auto n_first = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(data.n())));
    n_first = std::clamp<std::size_t>(n_first, 1, data.n() - 1);

    std::vector<std::size_t> first(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_first));
    std::vector<std::size_t> second(perm.begin() + static_cast<std::ptrdiff_t>(n_first), perm.end());
    return {subset(data, first), subset(data, second)};
}

} // namespace gcs
