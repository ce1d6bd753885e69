#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ofa {

// Pretrained word vectors, keyed by lowercased token.
class WordVectorTable {
public:
    WordVectorTable(std::size_t dimension, std::unordered_map<std::string, std::vector<double>> entries);

    std::size_t dimension() const noexcept { return dimension_; }
    std::size_t size() const noexcept { return entries_.size(); }

    // nullptr when the token has no vector.
    const std::vector<double>* find(std::string_view token) const;

    // Copy of this table with every vector multiplied by `factor`.
    WordVectorTable scaled(double factor) const;

private:
    std::size_t dimension_;
    std::unordered_map<std::string, std::vector<double>> entries_;
};

// Reads `token c1 ... cd` lines. Lines whose components are not all numbers
// are skipped; a numeric line of the wrong width is an error.
WordVectorTable load_word_vectors(const std::filesystem::path& path);

// Relative unigram frequencies p(w).
class FrequencyTable {
public:
    FrequencyTable(std::unordered_map<std::string, double> entries, double default_frequency);

    // Normalizes raw counts; default_frequency becomes 1 / total count.
    static FrequencyTable from_counts(const std::unordered_map<std::string, double>& counts);

    std::optional<double> find(std::string_view token) const;
    double default_frequency() const noexcept { return default_frequency_; }
    std::size_t size() const noexcept { return entries_.size(); }

private:
    std::unordered_map<std::string, double> entries_;
    double default_frequency_;
};

// Reads `token count` lines.
FrequencyTable load_frequencies(const std::filesystem::path& path);

enum class OovPolicy {
    // A token needs both a vector and a frequency entry.
    skip_token,
    // A token needs a vector; a missing frequency falls back to the default.
    use_default_frequency,
};

struct SifConfig {
    double smoothing_a = 1e-3;
    bool remove_common_component = false;
    OovPolicy oov_policy = OovPolicy::skip_token;

    void validate() const;
};

OovPolicy parse_oov_policy(std::string_view name);
std::string_view to_string(OovPolicy policy);

struct SentenceEmbedding {
    std::vector<double> values;
    std::string backend_id;

    std::size_t dimension() const noexcept { return values.size(); }
};

// Lowercases, splits on whitespace and strips leading/trailing ASCII
// punctuation from each piece. Interior punctuation ("i'm") is kept.
std::vector<std::string> tokenize(std::string_view text);

// SIF weight a / (a + p).
double sif_weight(double smoothing_a, double frequency) noexcept;

// Weighted mean of the resolved word vectors of `text`. Common-component
// removal is a batch step (see remove_common_component) and is not applied here.
SentenceEmbedding embed_sif(std::string_view text, const WordVectorTable& vectors,
                            const FrequencyTable& freqs, const SifConfig& config);

// Subtracts each embedding's projection onto the first principal direction
// of the batch (uncentered, as in SIF). Batches of fewer than two are untouched.
void remove_common_component(std::span<SentenceEmbedding> batch);

double euclidean_distance(const SentenceEmbedding& u, const SentenceEmbedding& v);

// Anything that turns sentences into vectors. nullopt marks a text the
// backend cannot represent; transport-level failures throw.
class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;
    virtual std::string id() const = 0;
    virtual std::vector<std::optional<SentenceEmbedding>> embed_batch(std::span<const std::string> texts) const = 0;
};

class SifBackend final : public EmbeddingBackend {
public:
    SifBackend(WordVectorTable vectors, FrequencyTable freqs, SifConfig config = {});

    std::string id() const override { return "sif"; }
    std::vector<std::optional<SentenceEmbedding>> embed_batch(std::span<const std::string> texts) const override;

    const WordVectorTable& vectors() const noexcept { return vectors_; }
    const FrequencyTable& frequencies() const noexcept { return freqs_; }
    const SifConfig& config() const noexcept { return config_; }

private:
    WordVectorTable vectors_;
    FrequencyTable freqs_;
    SifConfig config_;
};

struct RemoteBackendEndpoint {
    std::string url;  // e.g. http://127.0.0.1:9000 ; /embed is appended
    std::chrono::milliseconds timeout{5000};
};

// POST {url}/embed with {"texts": [...]}; expects {"vectors": [...], "dimension": d}.
std::vector<SentenceEmbedding> remote_embed(std::span<const std::string> texts,
                                            const RemoteBackendEndpoint& backend,
                                            const std::string& backend_id = "remote");

class RemoteEmbeddingBackend final : public EmbeddingBackend {
public:
    RemoteEmbeddingBackend(RemoteBackendEndpoint endpoint, std::string backend_id = "remote");

    std::string id() const override { return backend_id_; }
    std::vector<std::optional<SentenceEmbedding>> embed_batch(std::span<const std::string> texts) const override;

private:
    RemoteBackendEndpoint endpoint_;
    std::string backend_id_;
};

}  // namespace ofa
