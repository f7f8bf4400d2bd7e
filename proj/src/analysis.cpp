#include "lens/analysis.hpp"

#include "lens/codec.hpp"
#include "lens/error.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>

namespace lens::analysis {

namespace {

void check_shape(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b,
                 const char* what) {
    if (a.size() != b.size()) throw Error(ErrorCode::invalid_input, std::string(what) + ": batch sizes differ");
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].size() != b[i].size()) {
            throw Error(ErrorCode::invalid_input, std::string(what) + ": row " + std::to_string(i) + " shapes differ");
        }
    }
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

/// exp(v) - 1 - v without cancellation for small |v|.
double exp_excess(double v) {
    if (std::abs(v) >= 0.5) return std::expm1(v) - v;
    double term = v * v / 2.0;
    double sum = 0.0;
    for (int n = 3; term != 0.0 && std::abs(term) > 1e-18 * std::abs(sum); ++n) {
        sum += term;
        term *= v / n;
    }
    return sum;
}

} // namespace

VaeLoss vae_loss(const VaeBatch& b) {
    if (b.x.empty()) throw Error(ErrorCode::invalid_input, "empty batch");
    if (!(b.beta >= 0.0)) throw Error(ErrorCode::invalid_input, "beta must be >= 0");
    check_shape(b.x, b.x_hat, "x/x_hat");
    check_shape(b.mu, b.logvar, "mu/logvar");
    if (b.mu.size() != b.x.size()) throw Error(ErrorCode::invalid_input, "latent batch size differs from input");
    const std::size_t row_len = b.x[0].size();
    for (const auto& r : b.x) {
        if (r.size() != row_len) throw Error(ErrorCode::invalid_input, "inputs have ragged rows");
    }
    if (row_len == 0) throw Error(ErrorCode::invalid_input, "inputs have no elements");

    double sq = 0.0;
    for (std::size_t i = 0; i < b.x.size(); ++i) {
        for (std::size_t j = 0; j < row_len; ++j) {
            const double d = b.x[i][j] - b.x_hat[i][j];
            sq += d * d;
        }
    }
    VaeLoss out;
    out.recon = sq / static_cast<double>(b.x.size() * row_len);
    double kl = 0.0;
    for (std::size_t i = 0; i < b.mu.size(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < b.mu[i].size(); ++j) {
            const double lv = b.logvar[i][j];
            s += -exp_excess(lv) - b.mu[i][j] * b.mu[i][j];
        }
        kl += -0.5 * s;
    }
    out.kl = kl / static_cast<double>(b.mu.size());
    out.total = out.recon + b.beta * out.kl;
    return out;
}

void EmbeddingTable::validate() const {
    if (values.size() != ids.size() * dim) throw Error(ErrorCode::invalid_input, "embedding rows are ragged");
    std::set<std::string> seen;
    for (const std::string& id : ids) {
        if (!seen.insert(id).second) throw Error(ErrorCode::invalid_input, "duplicate embedding id " + id);
    }
    for (double v : values) {
        if (!std::isfinite(v)) throw Error(ErrorCode::invalid_input, "non-finite embedding value");
    }
}

std::vector<Neighbor> knn(const EmbeddingTable& table, const std::string& query_id, std::size_t k) {
    const auto it = std::find(table.ids.begin(), table.ids.end(), query_id);
    if (it == table.ids.end()) throw Error(ErrorCode::not_found, "id " + query_id + " not in embedding table");
    if (k == 0 || k >= table.size()) {
        throw Error(ErrorCode::invalid_input, "k must satisfy 1 <= k < N (N = " + std::to_string(table.size()) + ")");
    }
    const auto q = static_cast<std::size_t>(it - table.ids.begin());
    std::vector<Neighbor> all;
    all.reserve(table.size() - 1);
    const double* qv = table.row(q);
    for (std::size_t i = 0; i < table.size(); ++i) {
        if (i == q) continue;
        const double* v = table.row(i);
        double s = 0.0;
        for (std::size_t d = 0; d < table.dim; ++d) {
            const double diff = v[d] - qv[d];
            s += diff * diff;
        }
        all.push_back({table.ids[i], std::sqrt(s)});
    }
    auto less = [](const Neighbor& a, const Neighbor& b) {
        return a.distance != b.distance ? a.distance < b.distance : a.id < b.id;
    };
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), less);
    all.resize(k);
    return all;
}

EmbeddingTable parse_embeddings(const std::string& text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        std::string line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
        start = end + 1;
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.empty()) throw Error(ErrorCode::parse, "line 1: missing header");
    const auto header = split_csv_line(lines[0]);
    if (header.size() < 2 || header[0] != "id") throw Error(ErrorCode::parse, "line 1: header must be id,v0,...");
    for (std::size_t c = 1; c < header.size(); ++c) {
        if (header[c] != "v" + std::to_string(c - 1)) {
            throw Error(ErrorCode::parse, "line 1: column " + std::to_string(c + 1) + " must be v" + std::to_string(c - 1));
        }
    }
    EmbeddingTable t;
    t.dim = header.size() - 1;
    std::set<std::string> seen;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const std::string where = "line " + std::to_string(r + 1);
        const auto cells = split_csv_line(lines[r]);
        if (cells.size() != header.size()) {
            throw Error(ErrorCode::parse, where + ": expected " + std::to_string(header.size()) + " fields");
        }
        if (cells[0].empty()) throw Error(ErrorCode::parse, where + ": empty id");
        if (!seen.insert(cells[0]).second) throw Error(ErrorCode::parse, where + ": duplicate id " + cells[0]);
        t.ids.push_back(cells[0]);
        for (std::size_t c = 1; c < cells.size(); ++c) {
            const std::string& s = cells[c];
            char* end = nullptr;
            errno = 0;
            const double v = std::strtod(s.c_str(), &end);
            if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
                throw Error(ErrorCode::parse, where + ": '" + s + "' is not a number");
            }
            if (!std::isfinite(v)) throw Error(ErrorCode::parse, where + ": non-finite value '" + s + "'");
            t.values.push_back(v);
        }
    }
    return t;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
    try {
        return parse_embeddings(read_text(path));
    } catch (const Error& e) {
        if (e.code() == ErrorCode::parse) throw Error(ErrorCode::parse, path.string() + ": " + e.what());
        throw;
    }
}

std::string to_csv(const EmbeddingTable& table) {
    std::string out = "id";
    for (std::size_t d = 0; d < table.dim; ++d) out += ",v" + std::to_string(d);
    out += "\n";
    char buf[40];
    for (std::size_t i = 0; i < table.size(); ++i) {
        out += table.ids[i];
        for (std::size_t d = 0; d < table.dim; ++d) {
            std::snprintf(buf, sizeof(buf), "%.17g", table.row(i)[d]);
            out += ",";
            out += buf;
        }
        out += "\n";
    }
    return out;
}

} // namespace lens::analysis
