#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace topicopt {

// Sparse document-term counts in compressed sparse-row layout.
// Invariants: every stored count >= 1; col index < n_cols; row_offsets has
// n_rows + 1 entries; vocab.size() == n_cols.
struct DocumentTermMatrix {
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<std::size_t> row_offsets;  // size n_rows + 1
    std::vector<std::uint32_t> col_indices;
    std::vector<std::uint32_t> counts;
    std::vector<std::string> vocab;

    std::size_t row_nnz(std::size_t d) const {
        return row_offsets[d + 1] - row_offsets[d];
    }
    // Token count of document d.
    std::uint64_t row_sum(std::size_t d) const {
        std::uint64_t s = 0;
        for (std::size_t i = row_offsets[d]; i < row_offsets[d + 1]; ++i)
            s += counts[i];
        return s;
    }
    std::uint64_t total_count() const {
        std::uint64_t s = 0;
        for (auto c : counts) s += c;
        return s;
    }
};

struct PreprocessConfig {
    std::size_t max_vocab = 10000;
    std::size_t min_df = 5;
    double max_df_frac = 0.90;
    std::set<std::string> stopwords;
    bool lowercase = true;
};

struct BuildReport {
    std::vector<std::size_t> removed_docs;  // original indices of dropped docs
};

// Lowercases (optionally), splits on non-alphanumeric runs, drops tokens
// shorter than 2 characters and stopwords, applies the document-frequency
// window [min_df, max_df_frac * M], keeps the max_vocab most frequent terms
// (ties broken lexicographically). Documents left empty are removed and
// reported. Throws std::runtime_error("empty corpus") if nothing survives.
DocumentTermMatrix build_matrix(const std::vector<std::string>& documents,
                                const PreprocessConfig& config,
                                BuildReport* report = nullptr);

// Synthetic corpus with T_true planted topics: topic-word rows and per-doc
// mixtures are symmetric Dirichlet(concentration) draws; every document has
// exactly doc_len tokens.
DocumentTermMatrix generate_planted_corpus(std::size_t T_true, std::size_t V,
                                           std::size_t M, std::size_t doc_len,
                                           double concentration,
                                           std::uint64_t seed);

// Document-level split with a shared vocabulary. round(M * holdout_frac)
// documents go to validation. Throws if either side would be empty.
std::pair<DocumentTermMatrix, DocumentTermMatrix> split(
    const DocumentTermMatrix& matrix, double holdout_frac, std::uint64_t seed);

// JSON round-trip with an explicit format version.
std::string matrix_to_json(const DocumentTermMatrix& matrix);
DocumentTermMatrix matrix_from_json(const std::string& text);
void save_matrix(const DocumentTermMatrix& matrix, const std::string& path);
DocumentTermMatrix load_matrix(const std::string& path);

// Bundled English stopword list.
const std::set<std::string>& default_stopwords();

}  // namespace topicopt
