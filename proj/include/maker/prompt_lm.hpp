// Sample-specific prompt construction and frozen language-model providers.
#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "maker/data.hpp"

namespace maker::prompt_lm {

using Mat = Eigen::MatrixXd;

inline constexpr const char* kTemplateVersion = "v1";

// Deterministic prompt built from the sample's history statistics.
std::string build_prompt(const data::TrajectorySample& sample,
                         const std::string& dataset_name);

// Read-only tokenizer + embedding source. Implementations never update
// parameters after construction.
class FrozenLMProvider {
public:
    virtual ~FrozenLMProvider() = default;
    virtual int vocab_size() const = 0;
    virtual int embed_width() const = 0;  // d_llm
    virtual int context_limit() const = 0;
    virtual std::vector<int> tokenize(const std::string& text) const = 0;
    // rows = token count, cols = embed_width
    virtual Mat embed(const std::vector<int>& token_ids) const = 0;
    // Word embedding table W_E, vocab_size x embed_width.
    virtual const Mat& word_embedding_table() const = 0;
    virtual std::uint64_t checksum() const = 0;
};

struct TokenizeResult {
    std::vector<int> token_ids;
    int truncated_tokens = 0;
};

// Tokenize with context-limit truncation accounting.
TokenizeResult tokenize(const std::string& text, const FrozenLMProvider& provider);

Mat embed_tokens(const std::vector<int>& token_ids, const FrozenLMProvider& provider);

// Whitespace tokenizer with FNV-hashed ids and a hash-seeded embedding table.
class StubProvider final : public FrozenLMProvider {
public:
    explicit StubProvider(int vocab_size = 1000, int embed_width = 64,
                          std::uint64_t seed = 7, int context_limit = 4096);
    int vocab_size() const override { return vocab_size_; }
    int embed_width() const override { return int(table_.cols()); }
    int context_limit() const override { return context_limit_; }
    std::vector<int> tokenize(const std::string& text) const override;
    Mat embed(const std::vector<int>& token_ids) const override;
    const Mat& word_embedding_table() const override { return table_; }
    std::uint64_t checksum() const override;

private:
    int vocab_size_;
    int context_limit_;
    Mat table_;
};

// Adapter for an exported pretrained embedding table. Expects a directory with
//   lm_config.json   {"vocab_size": V, "embed_width": W, "context_limit": C}
//   vocab.txt        one token string per line, line number = id
//   embeddings.f32   row-major float32 table, V x W
// Tokenization is greedy longest-match over the vocabulary.
class PretrainedEmbeddingProvider final : public FrozenLMProvider {
public:
    explicit PretrainedEmbeddingProvider(const std::string& model_dir);
    int vocab_size() const override { return int(table_.rows()); }
    int embed_width() const override { return int(table_.cols()); }
    int context_limit() const override { return context_limit_; }
    std::vector<int> tokenize(const std::string& text) const override;
    Mat embed(const std::vector<int>& token_ids) const override;
    const Mat& word_embedding_table() const override { return table_; }
    std::uint64_t checksum() const override;

private:
    std::vector<std::string> vocab_;
    int context_limit_ = 1024;
    Mat table_;
};

// `stub` or `pretrained:<model-dir>`.
std::unique_ptr<FrozenLMProvider> make_provider(const std::string& key,
                                                int stub_vocab = 1000,
                                                int stub_width = 64,
                                                std::uint64_t stub_seed = 7);

}  // namespace maker::prompt_lm
