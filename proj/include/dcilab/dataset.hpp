#pragma once

#include "dcilab/common.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

namespace dcilab {

/// Kind of a tabular column. `indicator` never appears in a column spec
/// file; it marks the binary columns produced by one_hot().
enum class ColumnKind { numeric, categorical, label_class, label_numeric, indicator };

inline std::string_view to_string(ColumnKind k) {
    switch (k) {
        case ColumnKind::numeric: return "numeric";
        case ColumnKind::categorical: return "categorical";
        case ColumnKind::label_class: return "label_class";
        case ColumnKind::label_numeric: return "label_numeric";
        case ColumnKind::indicator: return "indicator";
    }
    return "?";
}

inline ColumnKind parse_column_kind(std::string_view s) {
    s = trim(s);
    if (s == "numeric") return ColumnKind::numeric;
    if (s == "categorical") return ColumnKind::categorical;
    if (s == "label_class") return ColumnKind::label_class;
    if (s == "label_numeric") return ColumnKind::label_numeric;
    throw ConfigError("unknown column kind '" + std::string(s) + "'");
}

inline bool is_label(ColumnKind k) {
    return k == ColumnKind::label_class || k == ColumnKind::label_numeric;
}

struct ColumnSpec {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
    /// Category names in id order. Filled by load_csv() for categorical and
    /// label_class columns; may be pre-seeded so that a second file (a test
    /// split, a query file) shares the id assignment of the first.
    std::vector<std::string> categories;
};

/// Checks the column-spec invariants: unique names, exactly one label column.
inline void validate_specs(const std::vector<ColumnSpec>& specs) {
    std::set<std::string> seen;
    int labels = 0;
    for (const auto& s : specs) {
        if (!seen.insert(s.name).second) throw ConfigError("duplicate column '" + s.name + "'");
        if (is_label(s.kind)) ++labels;
    }
    if (labels != 1) throw ConfigError("column spec must contain exactly one label column");
}

/// Parses a column spec file: one `name = kind` pair per line, `#` comments.
inline std::vector<ColumnSpec> parse_column_specs(std::string_view text) {
    std::vector<ColumnSpec> specs;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view v = line;
        if (auto hash = v.find('#'); hash != std::string_view::npos) v = v.substr(0, hash);
        v = trim(v);
        if (v.empty()) continue;
        const auto eq = v.rfind('=');
        if (eq == std::string_view::npos)
            throw ConfigError("column spec line " + std::to_string(lineno) + ": expected 'name = kind'");
        ColumnSpec s;
        s.name = std::string(trim(v.substr(0, eq)));
        s.kind = parse_column_kind(v.substr(eq + 1));
        if (s.name.empty()) throw ConfigError("column spec line " + std::to_string(lineno) + ": empty name");
        specs.push_back(std::move(s));
    }
    validate_specs(specs);
    return specs;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline std::vector<ColumnSpec> read_column_specs(const std::string& path) {
    try {
        return parse_column_specs(read_text_file(path));
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
}

struct Dataset {
    Matrix features;
    /// Class id (as an exact small integer) or numeric response per row.
    std::vector<double> labels;
    /// One spec per feature column, in column order.
    std::vector<ColumnSpec> columns;
    ColumnSpec label;
    /// Non-empty iff labels are class ids.
    std::vector<std::string> class_names;

    std::size_t rows() const { return labels.size(); }
    std::size_t dims() const { return static_cast<std::size_t>(features.cols()); }
    bool is_classification() const { return label.kind == ColumnKind::label_class; }

    Dataset subset(std::span<const std::size_t> idx) const {
        Dataset out;
        out.features.resize(static_cast<Eigen::Index>(idx.size()), features.cols());
        out.labels.reserve(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            out.features.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(idx[i]));
            out.labels.push_back(labels[idx[i]]);
        }
        out.columns = columns;
        out.label = label;
        out.class_names = class_names;
        return out;
    }
};

/// Integer class ids used for neighborhood impurity. Classification labels
/// are used as-is; numeric responses (ordinal targets) are mapped to ids by
/// ascending distinct value.
struct ClassLabels {
    std::vector<int> ids;
    std::size_t count = 0;
};

inline ClassLabels class_labels(const Dataset& ds) {
    ClassLabels out;
    out.ids.reserve(ds.rows());
    if (ds.is_classification()) {
        for (double v : ds.labels) out.ids.push_back(static_cast<int>(v));
        out.count = ds.class_names.size();
        return out;
    }
    std::vector<double> levels = ds.labels;
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    for (double v : ds.labels) {
        out.ids.push_back(static_cast<int>(std::lower_bound(levels.begin(), levels.end(), v) - levels.begin()));
    }
    out.count = levels.size();
    return out;
}

struct CsvOptions {
    char delimiter = ',';
    std::vector<std::string> missing_tokens{"?", ""};
};

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line, char delim) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == delim) {
            out.emplace_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.emplace_back(trim(cur));
    return out;
}

inline std::vector<std::vector<std::string>> read_csv_records(std::string_view text, char delim) {
    std::vector<std::vector<std::string>> records;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!trim(line).empty()) records.push_back(split_csv_line(line, delim));
        pos = nl + 1;
    }
    return records;
}

inline int category_id(ColumnSpec& spec, const std::string& token) {
    auto it = std::find(spec.categories.begin(), spec.categories.end(), token);
    if (it != spec.categories.end()) return static_cast<int>(it - spec.categories.begin());
    spec.categories.push_back(token);
    return static_cast<int>(spec.categories.size() - 1);
}

}  // namespace detail

/// Parses CSV text with a header row against column specs. Rows holding a
/// missing-value token in any column are dropped. Categorical and class-label
/// tokens are mapped to ids in first-seen order (after any pre-seeded
/// categories). When `require_label` is false the label column may be absent
/// from the header (query files); the result then has no labels.
inline Dataset parse_csv(std::string_view text, std::vector<ColumnSpec> specs, const CsvOptions& opts = {},
                         bool require_label = true) {
    validate_specs(specs);
    auto records = detail::read_csv_records(text, opts.delimiter);
    if (records.empty()) throw DataError("csv: missing header row");
    const auto& header = records.front();

    std::unordered_map<std::string, std::size_t> spec_of;
    for (std::size_t i = 0; i < specs.size(); ++i) spec_of[specs[i].name] = i;

    std::vector<std::size_t> col_spec(header.size());
    std::set<std::size_t> present;
    for (std::size_t c = 0; c < header.size(); ++c) {
        auto it = spec_of.find(header[c]);
        if (it == spec_of.end()) throw DataError("csv: unknown column '" + header[c] + "'");
        if (!present.insert(it->second).second) throw DataError("csv: duplicate column '" + header[c] + "'");
        col_spec[c] = it->second;
    }
    std::optional<std::size_t> label_col;
    std::vector<std::size_t> feature_cols;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (is_label(specs[col_spec[c]].kind))
            label_col = c;
        else
            feature_cols.push_back(c);
    }
    for (std::size_t i = 0; i < specs.size(); ++i) {
        if (present.count(i)) continue;
        if (!require_label && is_label(specs[i].kind)) continue;
        throw DataError("csv: column '" + specs[i].name + "' missing from header");
    }

    auto is_missing = [&](const std::string& tok) {
        return std::find(opts.missing_tokens.begin(), opts.missing_tokens.end(), tok) != opts.missing_tokens.end();
    };

    std::vector<double> values;
    std::vector<double> labels;
    values.reserve((records.size() - 1) * feature_cols.size());
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (rec.size() != header.size())
            throw DataError("csv: row " + std::to_string(r + 1) + " has " + std::to_string(rec.size()) +
                            " fields, expected " + std::to_string(header.size()));
        if (std::any_of(rec.begin(), rec.end(), is_missing)) continue;
        for (std::size_t c : feature_cols) {
            auto& spec = specs[col_spec[c]];
            if (spec.kind == ColumnKind::categorical) {
                values.push_back(detail::category_id(spec, rec[c]));
            } else {
                double v;
                if (!parse_double(rec[c], v))
                    throw DataError("csv: non-numeric token '" + rec[c] + "' in column '" + spec.name + "'");
                values.push_back(v);
            }
        }
        if (label_col) {
            auto& spec = specs[col_spec[*label_col]];
            if (spec.kind == ColumnKind::label_class) {
                labels.push_back(detail::category_id(spec, rec[*label_col]));
            } else {
                double v;
                if (!parse_double(rec[*label_col], v))
                    throw DataError("csv: non-numeric label '" + rec[*label_col] + "'");
                labels.push_back(v);
            }
        }
    }
    const std::size_t n = feature_cols.empty() ? 0 : values.size() / feature_cols.size();
    if (n == 0 && records.size() > 1) throw DataError("csv: no rows left after removing missing values");

    Dataset ds;
    ds.features = Eigen::Map<Matrix>(values.data(), static_cast<Eigen::Index>(n),
                                     static_cast<Eigen::Index>(feature_cols.size()));
    ds.labels = label_col ? std::move(labels) : std::vector<double>(n, 0.0);
    for (std::size_t c : feature_cols) ds.columns.push_back(specs[col_spec[c]]);
    for (const auto& s : specs) {
        if (is_label(s.kind)) ds.label = s;
    }
    if (ds.label.kind == ColumnKind::label_class) ds.class_names = ds.label.categories;
    return ds;
}

inline Dataset load_csv(const std::string& path, std::vector<ColumnSpec> specs, const CsvOptions& opts = {}) {
    return parse_csv(read_text_file(path), std::move(specs), opts);
}

/// Column specs of `ds` (features then label) carrying the category maps
/// learned so far; feed these to a second load so ids line up.
inline std::vector<ColumnSpec> learned_specs(const Dataset& ds) {
    std::vector<ColumnSpec> specs = ds.columns;
    specs.push_back(ds.label);
    return specs;
}

/// Expands every categorical column with c categories into c binary
/// indicator columns, in place of the original column.
inline Dataset one_hot(const Dataset& ds) {
    std::size_t width = 0;
    for (const auto& c : ds.columns) width += c.kind == ColumnKind::categorical ? c.categories.size() : 1;

    Dataset out;
    out.labels = ds.labels;
    out.label = ds.label;
    out.class_names = ds.class_names;
    out.features = Matrix::Zero(ds.features.rows(), static_cast<Eigen::Index>(width));
    Eigen::Index dst = 0;
    for (std::size_t c = 0; c < ds.columns.size(); ++c) {
        const auto& spec = ds.columns[c];
        const auto src = static_cast<Eigen::Index>(c);
        if (spec.kind != ColumnKind::categorical) {
            out.features.col(dst++) = ds.features.col(src);
            out.columns.push_back(spec);
            continue;
        }
        for (Eigen::Index r = 0; r < ds.features.rows(); ++r) {
            out.features(r, dst + static_cast<Eigen::Index>(ds.features(r, src))) = 1.0;
        }
        for (const auto& cat : spec.categories) {
            out.columns.push_back({spec.name + "=" + cat, ColumnKind::indicator, {}});
        }
        dst += static_cast<Eigen::Index>(spec.categories.size());
    }
    return out;
}

struct StandardizeOptions {
    /// Also z-score one-hot indicator columns (off: they stay 0/1).
    bool indicators = false;
};

/// Per-column affine map x -> (x - mean) * inv_scale. Columns that are not
/// standardized have mean 0 and inv_scale 1; constant columns have
/// inv_scale 0 so they map to 0 everywhere.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> inv_scale;

    static Standardizer fit(const Dataset& ds, std::span<const std::size_t> rows, StandardizeOptions opts = {}) {
        if (rows.empty()) throw std::invalid_argument("standardize: empty statistics row set");
        Standardizer s;
        const auto d = ds.dims();
        s.mean.assign(d, 0.0);
        s.inv_scale.assign(d, 1.0);
        const double n = static_cast<double>(rows.size());
        for (std::size_t c = 0; c < d; ++c) {
            const auto kind = ds.columns.empty() ? ColumnKind::numeric : ds.columns[c].kind;
            if (kind == ColumnKind::categorical) continue;
            if (kind == ColumnKind::indicator && !opts.indicators) continue;
            const auto col = static_cast<Eigen::Index>(c);
            double mu = 0.0;
            for (auto r : rows) mu += ds.features(static_cast<Eigen::Index>(r), col);
            mu /= n;
            double var = 0.0;
            for (auto r : rows) {
                const double dv = ds.features(static_cast<Eigen::Index>(r), col) - mu;
                var += dv * dv;
            }
            const double sd = std::sqrt(var / n);
            s.mean[c] = mu;
            s.inv_scale[c] = sd < 1e-12 ? 0.0 : 1.0 / sd;
        }
        return s;
    }

    void apply(Matrix& x) const {
        if (static_cast<std::size_t>(x.cols()) != mean.size())
            throw DataError("standardize: dimension mismatch");
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            for (Eigen::Index c = 0; c < x.cols(); ++c) {
                const auto cc = static_cast<std::size_t>(c);
                x(r, c) = (x(r, c) - mean[cc]) * inv_scale[cc];
            }
        }
    }

    Dataset apply(const Dataset& ds) const {
        Dataset out = ds;
        apply(out.features);
        return out;
    }
};

/// Z-scores numeric columns with population statistics over `stats_from`.
inline Dataset standardize(const Dataset& ds, std::span<const std::size_t> stats_from, StandardizeOptions opts = {}) {
    return Standardizer::fit(ds, stats_from, opts).apply(ds);
}

inline Dataset standardize(const Dataset& ds, StandardizeOptions opts = {}) {
    std::vector<std::size_t> all(ds.rows());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return standardize(ds, all, opts);
}

// ---------------------------------------------------------------------------
// IDX (MNIST) files

namespace detail {

inline std::uint32_t read_be32(std::string_view bytes, std::size_t off) {
    if (off + 4 > bytes.size()) throw DataError("idx: truncated header");
    std::uint32_t v = 0;
    for (std::size_t i = 0; i < 4; ++i) v = (v << 8) | static_cast<unsigned char>(bytes[off + i]);
    return v;
}

inline void write_be32(std::ostream& out, std::uint32_t v) {
    const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                       static_cast<char>(v)};
    out.write(b, 4);
}

}  // namespace detail

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// Loads an IDX image/label pair. Images are flattened row-major and scaled
/// from [0,255] to [0,1]; labels become class ids.
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    const std::string img = read_text_file(images_path);
    const std::string lab = read_text_file(labels_path);
    if (detail::read_be32(img, 0) != kIdxImageMagic) throw DataError("idx: bad image magic number");
    if (detail::read_be32(lab, 0) != kIdxLabelMagic) throw DataError("idx: bad label magic number");
    const std::size_t count = detail::read_be32(img, 4);
    const std::size_t h = detail::read_be32(img, 8);
    const std::size_t w = detail::read_be32(img, 12);
    const std::size_t nlab = detail::read_be32(lab, 4);
    if (count != nlab) throw DataError("idx: image count does not match label count");
    const std::size_t pixels = h * w;
    if (img.size() < 16 + count * pixels) throw DataError("idx: truncated image data");
    if (lab.size() < 8 + count) throw DataError("idx: truncated label data");

    Dataset ds;
    ds.features.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(pixels));
    ds.labels.resize(count);
    int max_label = 0;
    for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t p = 0; p < pixels; ++p) {
            const auto byte = static_cast<unsigned char>(img[16 + i * pixels + p]);
            ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p)) = byte / 255.0;
        }
        const int y = static_cast<unsigned char>(lab[8 + i]);
        ds.labels[i] = y;
        max_label = std::max(max_label, y);
    }
    ds.columns.reserve(pixels);
    for (std::size_t p = 0; p < pixels; ++p) ds.columns.push_back({"px" + std::to_string(p), ColumnKind::numeric, {}});
    ds.label = {"digit", ColumnKind::label_class, {}};
    for (int c = 0; c <= std::max(max_label, 9); ++c) ds.label.categories.push_back(std::to_string(c));
    ds.class_names = ds.label.categories;
    return ds;
}

/// Writes `ds` as an IDX pair with images of `height` x `width` pixels.
/// Feature values are expected in [0,1] and are quantized to bytes.
inline void write_idx(const Dataset& ds, std::size_t height, std::size_t width, const std::string& images_path,
                      const std::string& labels_path) {
    if (height * width != ds.dims()) throw DataError("idx: image shape does not match feature count");
    std::ofstream img(images_path, std::ios::binary);
    std::ofstream lab(labels_path, std::ios::binary);
    if (!img || !lab) throw DataError("idx: cannot open output files");
    detail::write_be32(img, kIdxImageMagic);
    detail::write_be32(img, static_cast<std::uint32_t>(ds.rows()));
    detail::write_be32(img, static_cast<std::uint32_t>(height));
    detail::write_be32(img, static_cast<std::uint32_t>(width));
    for (Eigen::Index r = 0; r < ds.features.rows(); ++r) {
        for (Eigen::Index c = 0; c < ds.features.cols(); ++c) {
            const double v = std::clamp(ds.features(r, c), 0.0, 1.0);
            img.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
        }
    }
    detail::write_be32(lab, kIdxLabelMagic);
    detail::write_be32(lab, static_cast<std::uint32_t>(ds.rows()));
    for (double y : ds.labels) lab.put(static_cast<char>(static_cast<unsigned char>(y)));
}

}  // namespace dcilab
