#pragma once

// Dataset files, feature standardisation and predictor files.
//
// Dataset file: comma-separated, LF line endings, header f1,...,fd,B,b and one
// auction per line. Numbers are written with 17 significant digits so a
// save/load cycle reproduces every double exactly.
//
// Predictor file: line-oriented text,
//
//   ovem-predictor 1
//   kind <linear|kernel|neural|scalar>
//   ...kind-specific lines, each "<key> <values...>"...
//   [center <d values>]      optional feature standardisation
//   [scale <d values>]
//   end

#include "ovem/auction.hpp"
#include "ovem/baselines.hpp"
#include "ovem/error.hpp"
#include "ovem/predictors.hpp"

#include <Eigen/Dense>

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace ovem {

namespace detail {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::optional<double> parse_double(std::string_view token) {
    // strip surrounding blanks and a trailing CR
    while (!token.empty() && (token.front() == ' ' || token.front() == '\t')) {
        token.remove_prefix(1);
    }
    while (!token.empty() && (token.back() == ' ' || token.back() == '\t' || token.back() == '\r')) {
        token.remove_suffix(1);
    }
    if (token.empty()) {
        return std::nullopt;
    }
    const std::string s(token);
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) {
        return std::nullopt;
    }
    return v;
}

inline std::vector<std::string_view> split_fields(std::string_view line, char delim) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(delim, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline std::string trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return std::string(s);
}

} // namespace detail

// ---------------------------------------------------------------------------
// Datasets

struct CsvFormat {
    char delimiter = ',';
};

inline Dataset parse_dataset(std::istream& in, const CsvFormat& format = {}, const std::string& source = "<stream>") {
    std::string line;
    if (!std::getline(in, line)) {
        throw Error(ErrorKind::parse_error, source + ":1: missing header");
    }
    const auto header = detail::split_fields(line, format.delimiter);
    if (header.size() < 3 || detail::trim(header[header.size() - 2]) != "B" ||
        detail::trim(header[header.size() - 1]) != "b") {
        throw Error(ErrorKind::parse_error, source + ":1: header must end with columns B,b after >= 1 feature");
    }
    const std::size_t dim = header.size() - 2;
    Dataset data(dim);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) {
            continue;
        }
        const auto fields = detail::split_fields(line, format.delimiter);
        const std::string where = source + ":" + std::to_string(line_no);
        if (fields.size() != dim + 2) {
            throw Error(ErrorKind::dimension_mismatch,
                        where + ": expected " + std::to_string(dim + 2) + " fields, got " +
                            std::to_string(fields.size()));
        }
        AuctionRecord rec;
        rec.features.resize(dim);
        for (std::size_t j = 0; j < dim + 2; ++j) {
            const auto v = detail::parse_double(fields[j]);
            if (!v) {
                throw Error(ErrorKind::parse_error,
                            where + ": field " + std::to_string(j + 1) + " is not a finite number");
            }
            if (j < dim) {
                rec.features[j] = *v;
            } else if (j == dim) {
                rec.highest_bid = *v;
            } else {
                rec.second_bid = *v;
            }
        }
        if (!(rec.second_bid >= 0.0 && rec.second_bid <= rec.highest_bid)) {
            throw Error(ErrorKind::invalid_bids, where + ": need 0 <= b <= B");
        }
        data.push_back(std::move(rec));
    }
    return data;
}

inline Dataset load_dataset(const std::filesystem::path& path, const CsvFormat& format = {}) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::io_error, "cannot open " + path.string());
    }
    return parse_dataset(in, format, path.string());
}

inline void write_dataset(std::ostream& out, const Dataset& data, const CsvFormat& format = {}) {
    for (std::size_t j = 0; j < data.dim(); ++j) {
        out << 'f' << (j + 1) << format.delimiter;
    }
    out << 'B' << format.delimiter << "b\n";
    for (const auto& r : data) {
        for (double f : r.features) {
            out << detail::format_double(f) << format.delimiter;
        }
        out << detail::format_double(r.highest_bid) << format.delimiter << detail::format_double(r.second_bid)
            << '\n';
    }
}

inline void save_dataset(const std::filesystem::path& path, const Dataset& data, const CsvFormat& format = {}) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::io_error, "cannot write " + path.string());
    }
    write_dataset(out, data, format);
    if (!out) {
        throw Error(ErrorKind::io_error, "write failed for " + path.string());
    }
}

/// Per-feature centring and scaling, fitted on one dataset and applied to any.
struct Standardizer {
    Eigen::VectorXd center;
    Eigen::VectorXd scale;

    /// Mean 0 and (population) standard deviation 1 on `train`. Constant
    /// columns keep scale 1.
    static Standardizer fit(const Dataset& train) {
        if (train.empty()) {
            throw Error(ErrorKind::empty_dataset, "cannot fit a standardizer on no records");
        }
        const Eigen::MatrixXd x = train.feature_matrix();
        Standardizer s;
        s.center = x.colwise().mean().transpose();
        s.scale = ((x.rowwise() - s.center.transpose()).array().square().colwise().mean()).sqrt().transpose();
        for (auto& v : s.scale) {
            if (!(v > 0.0)) {
                v = 1.0;
            }
        }
        return s;
    }

    std::vector<double> apply(std::span<const double> x) const {
        if (static_cast<Eigen::Index>(x.size()) != center.size()) {
            throw Error(ErrorKind::dimension_mismatch, "standardizer dimension mismatch");
        }
        std::vector<double> out(x.size());
        for (std::size_t j = 0; j < x.size(); ++j) {
            const auto k = static_cast<Eigen::Index>(j);
            out[j] = (x[j] - center(k)) / scale(k);
        }
        return out;
    }

    Dataset apply(const Dataset& data) const {
        Dataset out(data.dim());
        for (const auto& r : data) {
            out.push_back({apply(r.features), r.highest_bid, r.second_bid});
        }
        return out;
    }
};

// ---------------------------------------------------------------------------
// Predictors

using Predictor = std::variant<LinearPredictor, KernelPredictor, NeuralPredictor, ScalarPolicy>;

/// A predictor plus the feature transform it was trained under.
struct FittedModel {
    Predictor predictor;
    std::optional<Standardizer> transform;
};

inline std::string_view kind_name(const Predictor& p) {
    constexpr std::string_view names[] = {"linear", "kernel", "neural", "scalar"};
    return names[p.index()];
}

/// Reserve prices for every record of `data`, applying the model's transform first.
inline Eigen::VectorXd predict(const FittedModel& model, const Dataset& data) {
    const Dataset& input = data;
    std::optional<Dataset> transformed;
    if (model.transform) {
        transformed = model.transform->apply(data);
    }
    const Eigen::MatrixXd x = (transformed ? *transformed : input).feature_matrix();
    return std::visit([&](const auto& p) -> Eigen::VectorXd { return p.predict(x); }, model.predictor);
}

namespace detail {

inline void write_values(std::ostream& out, std::string_view key, const double* v, Eigen::Index n) {
    out << key;
    for (Eigen::Index i = 0; i < n; ++i) {
        out << ' ' << format_double(v[i]);
    }
    out << '\n';
}

inline void write_matrix(std::ostream& out, std::string_view key, const Eigen::MatrixXd& m) {
    out << key << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const Eigen::RowVectorXd row = m.row(i);
        write_values(out, "row", row.data(), row.size());
    }
}

class PredictorReader {
public:
    PredictorReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

    std::vector<std::string> line(std::string_view expected_key) {
        std::string text;
        while (std::getline(in_, text)) {
            ++line_no_;
            if (!trim(text).empty()) {
                std::istringstream ss(text);
                std::vector<std::string> tokens;
                for (std::string t; ss >> t;) {
                    tokens.push_back(t);
                }
                if (tokens.front() != expected_key) {
                    fail("expected '" + std::string(expected_key) + "', found '" + tokens.front() + "'");
                }
                tokens.erase(tokens.begin());
                return tokens;
            }
        }
        fail("unexpected end of file, expected '" + std::string(expected_key) + "'");
    }

    std::optional<std::string> peek_key() {
        const auto pos = in_.tellg();
        std::string text;
        const auto saved_line = line_no_;
        while (std::getline(in_, text)) {
            if (!trim(text).empty()) {
                std::istringstream ss(text);
                std::string key;
                ss >> key;
                in_.seekg(pos);
                line_no_ = saved_line;
                return key;
            }
        }
        in_.clear();
        in_.seekg(pos);
        return std::nullopt;
    }

    Eigen::VectorXd values(std::string_view key, Eigen::Index expected) {
        const auto tokens = line(key);
        if (expected >= 0 && static_cast<Eigen::Index>(tokens.size()) != expected) {
            fail("'" + std::string(key) + "' needs " + std::to_string(expected) + " values, found " +
                 std::to_string(tokens.size()));
        }
        Eigen::VectorXd v(static_cast<Eigen::Index>(tokens.size()));
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            const auto d = parse_double(tokens[i]);
            if (!d) {
                fail("bad number '" + tokens[i] + "'");
            }
            v(static_cast<Eigen::Index>(i)) = *d;
        }
        return v;
    }

    double scalar(std::string_view key) { return values(key, 1)(0); }

    long integer(std::string_view key) {
        const auto tokens = line(key);
        if (tokens.size() != 1) {
            fail("'" + std::string(key) + "' needs one integer");
        }
        try {
            std::size_t used = 0;
            const long v = std::stol(tokens[0], &used);
            if (used != tokens[0].size() || v < 0) {
                fail("bad integer '" + tokens[0] + "'");
            }
            return v;
        } catch (const std::logic_error&) {
            fail("bad integer '" + tokens[0] + "'");
        }
    }

    Eigen::MatrixXd matrix(std::string_view key) {
        const auto tokens = line(key);
        if (tokens.size() != 2) {
            fail("'" + std::string(key) + "' needs row and column counts");
        }
        const auto rows = static_cast<Eigen::Index>(std::stol(tokens[0]));
        const auto cols = static_cast<Eigen::Index>(std::stol(tokens[1]));
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i) {
            m.row(i) = values("row", cols).transpose();
        }
        return m;
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw Error(ErrorKind::malformed_file, source_ + ":" + std::to_string(line_no_) + ": " + msg);
    }

private:
    std::istream& in_;
    std::string source_;
    std::size_t line_no_ = 0;
};

} // namespace detail

inline void write_predictor(std::ostream& out, const FittedModel& model) {
    out << "ovem-predictor 1\n";
    out << "kind " << kind_name(model.predictor) << '\n';
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, LinearPredictor>) {
                out << "dim " << p.weights.size() << '\n';
                detail::write_values(out, "weights", p.weights.data(), p.weights.size());
                out << "intercept " << detail::format_double(p.intercept) << '\n';
            } else if constexpr (std::is_same_v<T, KernelPredictor>) {
                out << "degree " << p.degree << '\n';
                detail::write_values(out, "alpha", p.alpha.data(), p.alpha.size());
                detail::write_matrix(out, "train_features", p.train_features);
            } else if constexpr (std::is_same_v<T, NeuralPredictor>) {
                detail::write_matrix(out, "w1", p.w1);
                detail::write_values(out, "b1", p.b1.data(), p.b1.size());
                detail::write_values(out, "w2", p.w2.data(), p.w2.size());
            } else {
                out << "reserve " << detail::format_double(p.reserve) << '\n';
            }
        },
        model.predictor);
    if (model.transform) {
        detail::write_values(out, "center", model.transform->center.data(), model.transform->center.size());
        detail::write_values(out, "scale", model.transform->scale.data(), model.transform->scale.size());
    }
    out << "end\n";
}

inline FittedModel read_predictor(std::istream& in, const std::string& source = "<stream>") {
    detail::PredictorReader reader(in, source);
    const auto magic = reader.line("ovem-predictor");
    if (magic.size() != 1 || magic[0] != "1") {
        reader.fail("unsupported predictor file version");
    }
    const auto kind = reader.line("kind");
    if (kind.size() != 1) {
        reader.fail("kind line needs one value");
    }
    FittedModel model;
    std::size_t dim = 0;
    if (kind[0] == "linear") {
        const auto d = reader.integer("dim");
        LinearPredictor p;
        p.weights = reader.values("weights", d);
        p.intercept = reader.scalar("intercept");
        dim = p.dim();
        model.predictor = std::move(p);
    } else if (kind[0] == "kernel") {
        KernelPredictor p;
        p.degree = static_cast<int>(reader.integer("degree"));
        if (p.degree < 1) {
            reader.fail("kernel degree must be >= 1");
        }
        p.alpha = reader.values("alpha", -1);
        p.train_features = reader.matrix("train_features");
        if (p.train_features.rows() != p.alpha.size()) {
            reader.fail("alpha length does not match stored training rows");
        }
        dim = p.dim();
        model.predictor = std::move(p);
    } else if (kind[0] == "neural") {
        NeuralPredictor p;
        p.w1 = reader.matrix("w1");
        p.b1 = reader.values("b1", p.w1.rows());
        p.w2 = reader.values("w2", p.w1.rows()).transpose();
        dim = p.dim();
        model.predictor = std::move(p);
    } else if (kind[0] == "scalar") {
        model.predictor = ScalarPolicy{reader.scalar("reserve")};
    } else {
        reader.fail("unknown predictor kind '" + kind[0] + "'");
    }
    if (reader.peek_key() == "center") {
        Standardizer s;
        s.center = reader.values("center", -1);
        s.scale = reader.values("scale", s.center.size());
        if (dim != 0 && static_cast<std::size_t>(s.center.size()) != dim) {
            reader.fail("standardizer dimension does not match predictor");
        }
        model.transform = std::move(s);
    }
    reader.line("end");
    return model;
}

inline void save_predictor(const std::filesystem::path& path, const FittedModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::io_error, "cannot write " + path.string());
    }
    write_predictor(out, model);
    if (!out) {
        throw Error(ErrorKind::io_error, "write failed for " + path.string());
    }
}

inline void save_predictor(const std::filesystem::path& path, const Predictor& p) {
    save_predictor(path, FittedModel{p, std::nullopt});
}

inline FittedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::io_error, "cannot open " + path.string());
    }
    return read_predictor(in, path.string());
}

/// Loads a predictor of a specific kind; any other kind is a kind-mismatch.
template <class P>
P load_predictor(const std::filesystem::path& path) {
    FittedModel model = load_model(path);
    if (auto* p = std::get_if<P>(&model.predictor)) {
        return std::move(*p);
    }
    throw Error(ErrorKind::kind_mismatch,
                path.string() + " holds a " + std::string(kind_name(model.predictor)) + " predictor");
}

} // namespace ovem
