#include "topicopt/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

#include "topicopt/rng.hpp"

namespace topicopt {

namespace {

constexpr int kMatrixFormatVersion = 1;

std::vector<std::string> tokenize(const std::string& text, bool lowercase) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char ch : text) {
        if (std::isalnum(ch)) {
            cur.push_back(lowercase ? static_cast<char>(std::tolower(ch))
                                    : static_cast<char>(ch));
        } else if (!cur.empty()) {
            if (cur.size() >= 2) out.push_back(cur);
            cur.clear();
        }
    }
    if (cur.size() >= 2) out.push_back(cur);
    return out;
}

std::vector<double> dirichlet(Rng& rng, std::size_t dim, double concentration) {
    std::vector<double> x(dim);
    double sum = 0.0;
    for (auto& v : x) {
        v = rng.gamma(concentration, 1.0);
        sum += v;
    }
    // A degenerate draw (all mass underflowed) falls back to uniform.
    if (sum <= 0.0) {
        std::fill(x.begin(), x.end(), 1.0 / static_cast<double>(dim));
        return x;
    }
    for (auto& v : x) v /= sum;
    return x;
}

std::size_t sample_categorical(Rng& rng, const std::vector<double>& probs) {
    double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return i;
    }
    return probs.size() - 1;
}

DocumentTermMatrix from_rows(
    const std::vector<std::map<std::uint32_t, std::uint32_t>>& rows,
    std::vector<std::string> vocab) {
    DocumentTermMatrix m;
    m.n_rows = rows.size();
    m.n_cols = vocab.size();
    m.vocab = std::move(vocab);
    m.row_offsets.reserve(rows.size() + 1);
    m.row_offsets.push_back(0);
    for (const auto& row : rows) {
        for (const auto& [w, c] : row) {
            m.col_indices.push_back(w);
            m.counts.push_back(c);
        }
        m.row_offsets.push_back(m.col_indices.size());
    }
    return m;
}

}  // namespace

DocumentTermMatrix build_matrix(const std::vector<std::string>& documents,
                                const PreprocessConfig& config,
                                BuildReport* report) {
    if (documents.empty()) {
        throw std::invalid_argument("build_matrix: documents must be nonempty");
    }
    if (config.min_df < 1 || config.max_df_frac <= 0.0 ||
        config.max_df_frac > 1.0) {
        throw std::invalid_argument("build_matrix: invalid preprocess config");
    }
    const std::size_t M = documents.size();

    std::vector<std::vector<std::string>> docs(M);
    std::unordered_map<std::string, std::size_t> df;
    std::unordered_map<std::string, std::uint64_t> cf;
    for (std::size_t d = 0; d < M; ++d) {
        docs[d] = tokenize(documents[d], config.lowercase);
        std::set<std::string> seen;
        for (auto& tok : docs[d]) {
            if (config.stopwords.count(tok)) continue;
            cf[tok] += 1;
            if (seen.insert(tok).second) df[tok] += 1;
        }
    }

    const double max_df = config.max_df_frac * static_cast<double>(M);
    std::vector<std::pair<std::uint64_t, std::string>> kept;
    for (const auto& [term, n] : df) {
        if (n < config.min_df) continue;
        if (static_cast<double>(n) > max_df) continue;
        kept.emplace_back(cf[term], term);
    }
    // Most frequent first; equal frequencies ordered lexicographically.
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    if (kept.size() > config.max_vocab) kept.resize(config.max_vocab);

    std::vector<std::string> vocab;
    vocab.reserve(kept.size());
    std::unordered_map<std::string, std::uint32_t> index;
    for (const auto& [n, term] : kept) {
        index.emplace(term, static_cast<std::uint32_t>(vocab.size()));
        vocab.push_back(term);
    }

    std::vector<std::map<std::uint32_t, std::uint32_t>> rows;
    std::vector<std::size_t> removed;
    for (std::size_t d = 0; d < M; ++d) {
        std::map<std::uint32_t, std::uint32_t> row;
        for (const auto& tok : docs[d]) {
            auto it = index.find(tok);
            if (it != index.end()) row[it->second] += 1;
        }
        if (row.empty()) {
            removed.push_back(d);
        } else {
            rows.push_back(std::move(row));
        }
    }
    if (rows.empty()) {
        throw std::runtime_error("empty corpus");
    }
    if (report) report->removed_docs = std::move(removed);
    return from_rows(rows, std::move(vocab));
}

DocumentTermMatrix generate_planted_corpus(std::size_t T_true, std::size_t V,
                                           std::size_t M, std::size_t doc_len,
                                           double concentration,
                                           std::uint64_t seed) {
    if (T_true == 0 || V == 0 || M == 0 || doc_len == 0 ||
        concentration <= 0.0) {
        throw std::invalid_argument(
            "generate_planted_corpus: all sizes must be positive");
    }
    Rng rng(seed);
    std::vector<std::vector<double>> topics(T_true);
    for (auto& t : topics) t = dirichlet(rng, V, concentration);

    std::vector<std::map<std::uint32_t, std::uint32_t>> rows(M);
    for (std::size_t d = 0; d < M; ++d) {
        const std::vector<double> theta = dirichlet(rng, T_true, concentration);
        for (std::size_t n = 0; n < doc_len; ++n) {
            const std::size_t z = sample_categorical(rng, theta);
            const std::size_t w = sample_categorical(rng, topics[z]);
            rows[d][static_cast<std::uint32_t>(w)] += 1;
        }
    }

    std::vector<std::string> vocab(V);
    for (std::size_t w = 0; w < V; ++w) {
        std::ostringstream name;
        name << "term";
        std::string digits = std::to_string(w);
        name << std::string(6 - std::min<std::size_t>(6, digits.size()), '0')
             << digits;
        vocab[w] = name.str();
    }
    return from_rows(rows, std::move(vocab));
}

std::pair<DocumentTermMatrix, DocumentTermMatrix> split(
    const DocumentTermMatrix& matrix, double holdout_frac, std::uint64_t seed) {
    if (holdout_frac <= 0.0 || holdout_frac >= 1.0) {
        throw std::invalid_argument("split: holdout_frac must be in (0, 1)");
    }
    const std::size_t M = matrix.n_rows;
    const std::size_t n_val = static_cast<std::size_t>(
        std::llround(holdout_frac * static_cast<double>(M)));
    if (n_val == 0 || n_val == M) {
        throw std::runtime_error("split: one side of the split is empty");
    }
    std::vector<std::size_t> order(M);
    for (std::size_t i = 0; i < M; ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);

    std::vector<bool> is_val(M, false);
    for (std::size_t i = 0; i < n_val; ++i) is_val[order[i]] = true;

    auto take = [&](bool val_side) {
        DocumentTermMatrix out;
        out.n_cols = matrix.n_cols;
        out.vocab = matrix.vocab;
        out.row_offsets.push_back(0);
        for (std::size_t d = 0; d < M; ++d) {
            if (is_val[d] != val_side) continue;
            for (std::size_t i = matrix.row_offsets[d];
                 i < matrix.row_offsets[d + 1]; ++i) {
                out.col_indices.push_back(matrix.col_indices[i]);
                out.counts.push_back(matrix.counts[i]);
            }
            out.row_offsets.push_back(out.col_indices.size());
            out.n_rows += 1;
        }
        return out;
    };
    return {take(false), take(true)};
}

std::string matrix_to_json(const DocumentTermMatrix& matrix) {
    nlohmann::json j;
    j["format_version"] = kMatrixFormatVersion;
    j["n_rows"] = matrix.n_rows;
    j["n_cols"] = matrix.n_cols;
    j["row_offsets"] = matrix.row_offsets;
    j["col_indices"] = matrix.col_indices;
    j["counts"] = matrix.counts;
    j["vocab"] = matrix.vocab;
    return j.dump();
}

DocumentTermMatrix matrix_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    if (!j.contains("format_version") ||
        j["format_version"].get<int>() != kMatrixFormatVersion) {
        throw std::runtime_error("matrix_from_json: unsupported format version");
    }
    DocumentTermMatrix m;
    m.n_rows = j.at("n_rows").get<std::size_t>();
    m.n_cols = j.at("n_cols").get<std::size_t>();
    m.row_offsets = j.at("row_offsets").get<std::vector<std::size_t>>();
    m.col_indices = j.at("col_indices").get<std::vector<std::uint32_t>>();
    m.counts = j.at("counts").get<std::vector<std::uint32_t>>();
    m.vocab = j.at("vocab").get<std::vector<std::string>>();
    if (m.row_offsets.size() != m.n_rows + 1 ||
        m.col_indices.size() != m.counts.size() ||
        m.vocab.size() != m.n_cols ||
        m.row_offsets.back() != m.col_indices.size()) {
        throw std::runtime_error("matrix_from_json: inconsistent shape");
    }
    for (auto c : m.counts) {
        if (c == 0) throw std::runtime_error("matrix_from_json: zero count");
    }
    for (auto w : m.col_indices) {
        if (w >= m.n_cols)
            throw std::runtime_error("matrix_from_json: column out of range");
    }
    return m;
}

void save_matrix(const DocumentTermMatrix& matrix, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_matrix: cannot open " + path);
    out << matrix_to_json(matrix);
}

DocumentTermMatrix load_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_matrix: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return matrix_from_json(buf.str());
}

}  // namespace topicopt
