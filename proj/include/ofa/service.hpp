#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "ofa/embedding.hpp"
#include "ofa/orchestrator.hpp"

namespace ofa {

struct ServiceConfig {
    std::string listen_host = "127.0.0.1";
    int listen_port = 8080;
    std::filesystem::path registry_path;
    std::optional<std::filesystem::path> word_vectors_path;
    std::optional<std::filesystem::path> frequencies_path;
    std::optional<std::filesystem::path> refusal_patterns_path;
    SifConfig sif;
    std::optional<std::string> embedding_backend_url;
    std::string embedding_backend_id = "remote";
    std::filesystem::path log_path;
    bool default_prefilter = true;
    std::string fallback_text = OrchestratorOptions{}.fallback_text;
    DomainPreferenceList domain_preferences;
    // Relative script paths in POST /agents resolve against this.
    std::filesystem::path base_dir;

    // Throws ConfigError when a referenced path is missing or the embedding
    // backend is ambiguous (both or neither of SIF files and remote URL).
    void validate() const;
};

// Relative paths resolve against the config file's directory. OFA_LISTEN
// (host:port) overrides the listen address.
ServiceConfig load_service_config(const std::filesystem::path& path);

// "host:port" -> (host, port).
std::pair<std::string, int> parse_listen_address(const std::string& address);

std::shared_ptr<const EmbeddingBackend> make_backend(const ServiceConfig& config);
std::shared_ptr<Orchestrator> make_orchestrator(const ServiceConfig& config);

// JSON-over-HTTP front end for an Orchestrator.
class Service {
public:
    explicit Service(std::shared_ptr<Orchestrator> orchestrator, std::filesystem::path base_dir = {});
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    // Binds (port 0 picks a free port), serves on a background thread and
    // returns the bound port. Throws ConfigError when binding fails.
    int start(const std::string& host, int port);
    // Blocks serving on the calling thread.
    void run(const std::string& host, int port);
    void stop();

    Orchestrator& orchestrator() noexcept { return *orchestrator_; }

private:
    struct Impl;
    std::shared_ptr<Orchestrator> orchestrator_;
    std::unique_ptr<Impl> impl_;
};

}  // namespace ofa
