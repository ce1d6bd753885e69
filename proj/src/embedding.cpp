#include "ofa/embedding.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "http_client.hpp"
#include "ofa/errors.hpp"

namespace ofa {

namespace {

bool is_ascii_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_ascii_punct(char c) {
    const auto u = static_cast<unsigned char>(c);
    return u < 128 && std::ispunct(u);
}

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && is_ascii_space(line[i])) ++i;
        const std::size_t start = i;
        while (i < line.size() && !is_ascii_space(line[i])) ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

std::optional<double> parse_double(std::string_view s) {
    double value = 0.0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (ec != std::errc{} || ptr != end || !std::isfinite(value)) return std::nullopt;
    return value;
}

std::string ascii_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) {
        const auto u = static_cast<unsigned char>(c);
        if (u < 128) c = static_cast<char>(std::tolower(u));
    }
    return out;
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot read " + path.string());
    return in;
}

}  // namespace

WordVectorTable::WordVectorTable(std::size_t dimension,
                                 std::unordered_map<std::string, std::vector<double>> entries)
    : dimension_(dimension), entries_(std::move(entries)) {
    if (dimension_ == 0) throw ValidationError("word vector dimension must be at least 1");
    if (entries_.empty()) throw ValidationError("word vector table is empty");
    for (const auto& [token, vec] : entries_) {
        if (vec.size() != dimension_) {
            throw DimensionMismatch("vector for '" + token + "' has " + std::to_string(vec.size()) +
                                    " components, expected " + std::to_string(dimension_));
        }
    }
}

const std::vector<double>* WordVectorTable::find(std::string_view token) const {
    const auto it = entries_.find(std::string(token));
    return it == entries_.end() ? nullptr : &it->second;
}

WordVectorTable WordVectorTable::scaled(double factor) const {
    auto copy = entries_;
    for (auto& [_, vec] : copy) {
        for (auto& x : vec) x *= factor;
    }
    return WordVectorTable(dimension_, std::move(copy));
}

namespace {

bool is_integer(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

}  // namespace

WordVectorTable load_word_vectors(const std::filesystem::path& path) {
    auto in = open_or_throw(path);
    std::unordered_map<std::string, std::vector<double>> entries;
    std::size_t dimension = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto fields = split_ws(line);
        if (fields.size() < 2) continue;
        // word2vec text files open with a "count dimension" header.
        if (line_no == 1 && fields.size() == 2 && is_integer(fields[0]) && is_integer(fields[1])) continue;

        std::vector<double> vec;
        vec.reserve(fields.size() - 1);
        bool numeric = true;
        for (std::size_t i = 1; i < fields.size(); ++i) {
            const auto v = parse_double(fields[i]);
            if (!v) {
                numeric = false;
                break;
            }
            vec.push_back(*v);
        }
        if (!numeric) continue;

        if (dimension == 0) {
            dimension = vec.size();
        } else if (vec.size() != dimension) {
            throw DimensionMismatch(path.string() + ":" + std::to_string(line_no) + ": expected " +
                                    std::to_string(dimension) + " components, found " +
                                    std::to_string(vec.size()));
        }
        entries.insert_or_assign(ascii_lower(fields[0]), std::move(vec));
    }
    if (entries.empty()) throw ParseError(path.string() + ": no valid word vector lines");
    return WordVectorTable(dimension, std::move(entries));
}

FrequencyTable::FrequencyTable(std::unordered_map<std::string, double> entries, double default_frequency)
    : entries_(std::move(entries)), default_frequency_(default_frequency) {
    if (!(default_frequency_ > 0.0 && default_frequency_ <= 1.0)) {
        throw ValidationError("default frequency must lie in (0, 1]");
    }
    for (const auto& [token, p] : entries_) {
        if (!(p > 0.0 && p <= 1.0)) {
            throw ValidationError("frequency of '" + token + "' must lie in (0, 1]");
        }
    }
}

FrequencyTable FrequencyTable::from_counts(const std::unordered_map<std::string, double>& counts) {
    double total = 0.0;
    for (const auto& [token, count] : counts) {
        if (!(count > 0.0)) throw ValidationError("count of '" + token + "' must be positive");
        total += count;
    }
    if (!(total > 0.0)) throw ValidationError("frequency table is empty");
    std::unordered_map<std::string, double> entries;
    entries.reserve(counts.size());
    for (const auto& [token, count] : counts) entries.emplace(token, count / total);
    return FrequencyTable(std::move(entries), std::min(1.0, 1.0 / total));
}

std::optional<double> FrequencyTable::find(std::string_view token) const {
    const auto it = entries_.find(std::string(token));
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

FrequencyTable load_frequencies(const std::filesystem::path& path) {
    auto in = open_or_throw(path);
    std::unordered_map<std::string, double> counts;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto fields = split_ws(line);
        if (fields.empty()) continue;
        const auto count = fields.size() == 2 ? parse_double(fields[1]) : std::nullopt;
        if (!count) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected 'token count'");
        }
        counts[ascii_lower(fields[0])] += *count;
    }
    if (counts.empty()) throw ParseError(path.string() + ": no frequency lines");
    return FrequencyTable::from_counts(counts);
}

void SifConfig::validate() const {
    if (!(smoothing_a > 0.0) || !std::isfinite(smoothing_a)) {
        throw ValidationError("SIF smoothing parameter a must be positive");
    }
}

OovPolicy parse_oov_policy(std::string_view name) {
    if (name == "skip_token") return OovPolicy::skip_token;
    if (name == "use_default_frequency") return OovPolicy::use_default_frequency;
    throw ParseError("unknown OOV policy: " + std::string(name));
}

std::string_view to_string(OovPolicy policy) {
    switch (policy) {
        case OovPolicy::skip_token: return "skip_token";
        case OovPolicy::use_default_frequency: return "use_default_frequency";
    }
    return "skip_token";
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    for (auto piece : split_ws(text)) {
        while (!piece.empty() && is_ascii_punct(piece.front())) piece.remove_prefix(1);
        while (!piece.empty() && is_ascii_punct(piece.back())) piece.remove_suffix(1);
        if (!piece.empty()) tokens.push_back(ascii_lower(piece));
    }
    return tokens;
}

double sif_weight(double smoothing_a, double frequency) noexcept {
    return smoothing_a / (smoothing_a + frequency);
}

SentenceEmbedding embed_sif(std::string_view text, const WordVectorTable& vectors,
                            const FrequencyTable& freqs, const SifConfig& config) {
    config.validate();
    std::vector<double> sum(vectors.dimension(), 0.0);
    std::size_t resolved = 0;
    for (const auto& token : tokenize(text)) {
        const auto* vec = vectors.find(token);
        if (vec == nullptr) continue;
        auto p = freqs.find(token);
        if (!p) {
            if (config.oov_policy == OovPolicy::skip_token) continue;
            p = freqs.default_frequency();
        }
        const double w = sif_weight(config.smoothing_a, *p);
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += w * (*vec)[i];
        ++resolved;
    }
    if (resolved == 0) {
        throw NoResolvableTokens("no token of \"" + std::string(text) + "\" has a word vector");
    }
    for (auto& x : sum) x /= static_cast<double>(resolved);
    return SentenceEmbedding{std::move(sum), "sif"};
}

void remove_common_component(std::span<SentenceEmbedding> batch) {
    if (batch.size() < 2) return;
    const auto dim = batch.front().dimension();
    Eigen::MatrixXd x(static_cast<Eigen::Index>(batch.size()), static_cast<Eigen::Index>(dim));
    for (std::size_t r = 0; r < batch.size(); ++r) {
        if (batch[r].dimension() != dim) throw DimensionMismatch("embedding batch has mixed dimensions");
        for (std::size_t c = 0; c < dim; ++c) {
            x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = batch[r].values[c];
        }
    }
    const Eigen::MatrixXd gram = x.transpose() * x;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
    if (solver.info() != Eigen::Success) return;
    // Eigenvalues come back ascending.
    const Eigen::VectorXd u = solver.eigenvectors().col(static_cast<Eigen::Index>(dim) - 1);
    for (auto& e : batch) {
        const Eigen::Map<Eigen::VectorXd> v(e.values.data(), static_cast<Eigen::Index>(dim));
        const double proj = u.dot(v);
        for (std::size_t c = 0; c < dim; ++c) e.values[c] -= proj * u(static_cast<Eigen::Index>(c));
    }
}

double euclidean_distance(const SentenceEmbedding& u, const SentenceEmbedding& v) {
    if (u.dimension() != v.dimension()) {
        throw DimensionMismatch("cannot compare embeddings of dimension " + std::to_string(u.dimension()) +
                                " and " + std::to_string(v.dimension()));
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < u.values.size(); ++i) {
        const double d = u.values[i] - v.values[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

SifBackend::SifBackend(WordVectorTable vectors, FrequencyTable freqs, SifConfig config)
    : vectors_(std::move(vectors)), freqs_(std::move(freqs)), config_(config) {
    config_.validate();
}

std::vector<std::optional<SentenceEmbedding>> SifBackend::embed_batch(std::span<const std::string> texts) const {
    std::vector<std::optional<SentenceEmbedding>> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        try {
            out.emplace_back(embed_sif(text, vectors_, freqs_, config_));
        } catch (const NoResolvableTokens&) {
            out.emplace_back(std::nullopt);
        }
    }
    if (config_.remove_common_component) {
        std::vector<SentenceEmbedding> resolved;
        for (auto& e : out) {
            if (e) resolved.push_back(std::move(*e));
        }
        remove_common_component(resolved);
        std::size_t next = 0;
        for (auto& e : out) {
            if (e) *e = std::move(resolved[next++]);
        }
    }
    return out;
}

std::vector<SentenceEmbedding> remote_embed(std::span<const std::string> texts, const RemoteBackendEndpoint& backend,
                                            const std::string& backend_id) {
    if (texts.empty()) throw ValidationError("remote_embed needs at least one text");

    nlohmann::json request;
    request["texts"] = std::vector<std::string>(texts.begin(), texts.end());
    const auto reply = detail::post_json(backend.url, "/embed", request.dump(), backend.timeout);
    if (reply.status < 200 || reply.status >= 300) {
        throw TransportError("embedding backend returned HTTP " + std::to_string(reply.status));
    }

    nlohmann::json body;
    try {
        body = nlohmann::json::parse(reply.body);
    } catch (const nlohmann::json::parse_error& e) {
        throw ProtocolError(std::string("embedding backend sent invalid JSON: ") + e.what());
    }
    if (!body.is_object() || !body.contains("vectors") || !body["vectors"].is_array()) {
        throw ProtocolError("embedding backend reply has no 'vectors' array");
    }
    const auto& vectors = body["vectors"];
    if (vectors.size() != texts.size()) {
        throw ProtocolError("embedding backend returned " + std::to_string(vectors.size()) + " vectors for " +
                            std::to_string(texts.size()) + " texts");
    }

    std::optional<std::size_t> declared;
    if (body.contains("dimension")) {
        if (!body["dimension"].is_number_unsigned()) throw ProtocolError("'dimension' must be a positive integer");
        declared = body["dimension"].get<std::size_t>();
    }

    std::vector<SentenceEmbedding> out;
    out.reserve(vectors.size());
    for (const auto& v : vectors) {
        if (!v.is_array() || v.empty()) throw ProtocolError("each vector must be a non-empty array");
        SentenceEmbedding e{{}, backend_id};
        e.values.reserve(v.size());
        for (const auto& x : v) {
            if (!x.is_number()) throw ProtocolError("vector components must be numbers");
            const double d = x.get<double>();
            if (!std::isfinite(d)) throw ProtocolError("vector components must be finite");
            e.values.push_back(d);
        }
        const auto expected = declared ? *declared : out.empty() ? e.dimension() : out.front().dimension();
        if (e.dimension() != expected) {
            throw ProtocolError("embedding backend returned inconsistent dimensions");
        }
        out.push_back(std::move(e));
    }
    return out;
}

RemoteEmbeddingBackend::RemoteEmbeddingBackend(RemoteBackendEndpoint endpoint, std::string backend_id)
    : endpoint_(std::move(endpoint)), backend_id_(std::move(backend_id)) {}

std::vector<std::optional<SentenceEmbedding>> RemoteEmbeddingBackend::embed_batch(
    std::span<const std::string> texts) const {
    std::vector<std::optional<SentenceEmbedding>> out;
    if (texts.empty()) return out;
    for (auto& e : remote_embed(texts, endpoint_, backend_id_)) out.emplace_back(std::move(e));
    return out;
}

}  // namespace ofa
