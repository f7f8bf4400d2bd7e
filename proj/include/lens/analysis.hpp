/**
 * @file analysis.hpp
 * @brief VAE objective evaluation and exact nearest-neighbour retrieval over embeddings.
 */
#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace lens::analysis {

/// Weight of the KL term used for the pottery-profile VAE.
inline constexpr double default_beta = 0.00025;
inline constexpr std::size_t latent_dim = 128;

struct VaeBatch {
    /// n rows of equal length: inputs and reconstructions.
    std::vector<std::vector<double>> x;
    std::vector<std::vector<double>> x_hat;
    /// n rows of latent means and log-variances.
    std::vector<std::vector<double>> mu;
    std::vector<std::vector<double>> logvar;
    double beta = default_beta;
};

struct VaeLoss {
    double recon = 0;
    double kl = 0;
    double total = 0;
};

/**
 * recon = mean squared error over all elements; kl = batch mean of
 * -1/2 * sum(1 + logvar - mu^2 - exp(logvar)); total = recon + beta * kl.
 * Throws invalid_input on shape mismatch, empty batches or negative beta.
 */
VaeLoss vae_loss(const VaeBatch& batch);

struct EmbeddingTable {
    std::vector<std::string> ids;
    /// Row-major N x dim.
    std::vector<double> values;
    std::size_t dim = 0;

    std::size_t size() const { return ids.size(); }
    const double* row(std::size_t i) const { return values.data() + i * dim; }
    /// Throws invalid_input for duplicate ids, ragged rows or non-finite values.
    void validate() const;
};

struct Neighbor {
    std::string id;
    double distance = 0;
};

/**
 * Exact Euclidean k nearest neighbours of @p query_id, excluding the query
 * row, ordered by distance then id. Throws not_found for an unknown id and
 * invalid_input when k is 0 or k >= N.
 */
std::vector<Neighbor> knn(const EmbeddingTable& table, const std::string& query_id, std::size_t k = 5);

/// CSV with header "id,v0,...,v{d-1}". Errors name the 1-based line.
EmbeddingTable parse_embeddings(const std::string& text);
EmbeddingTable load_embeddings(const std::filesystem::path& path);
/// Values printed with %.17g so a reload is exact; LF line endings.
std::string to_csv(const EmbeddingTable& table);

} // namespace lens::analysis
