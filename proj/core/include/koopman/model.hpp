#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "koopman/dataset.hpp"
#include "koopman/linalg.hpp"
#include "koopman/matrix.hpp"
#include "koopman/nn.hpp"

namespace koopman {

enum class NormalizationMode { per_component, global_max };

std::string to_string(NormalizationMode mode);
NormalizationMode parse_normalization_mode(const std::string& text);

// z = (x - mean) / scale, componentwise.
struct Normalizer {
    std::vector<double> mean;
    std::vector<double> scale;
    NormalizationMode mode = NormalizationMode::per_component;

    std::size_t dim() const noexcept { return mean.size(); }
    Matrix normalize(const Matrix& x) const;
    Matrix denormalize(const Matrix& z) const;
    Matrix normalize_rate(const Matrix& xdot) const;  // xdot / scale
    void validate() const;

    static Normalizer identity(std::size_t n);
};

// Uses uncorrected (divide-by-M) standard deviations.
Normalizer fit_normalizer(const Matrix& x, NormalizationMode mode);

// Tridiagonal Koopman generator: diagonal -sigma_i^2, super-diagonal zeta_i,
// sub-diagonal -zeta_i. Symmetric part is -diag(sigma^2), hence stable.
struct StableKoopman {
    std::vector<double> zeta;   // D - 1
    std::vector<double> sigma;  // D

    std::size_t dim() const noexcept { return sigma.size(); }
    std::size_t parameter_count() const noexcept { return zeta.size() + sigma.size(); }
    void validate() const;
};

Matrix assemble_K(const StableKoopman& k);

// Blocks [[r, m], [-m, r]] for each conjugate pair r +- im (m > 0), then the
// real eigenvalues, all uncoupled. Throws DomainError for Re > 0.
StableKoopman stable_from_spectrum(const ComplexSpectrum& target, double tol = 1e-12);

// Encoder/decoder with a linear SVD-DMD skip path:
//   encode(z) = enc_net(z) + z diag(scale) V_D L_enc
//   decode(p) = dec_net(p) + p L_dec V_D^T diag(scale)^{-1}
// L_enc and L_dec are D x D; with both equal to I the skip path is the plain
// SVD projection pair.
struct KoopmanModel {
    FeedForwardNet encoder;
    FeedForwardNet decoder;
    Matrix svd_basis;  // N x D, zero columns beyond rank
    bool svd_embedding = true;
    Matrix encoder_linear;
    Matrix decoder_linear;
    StableKoopman koopman;
    Normalizer normalizer;

    std::size_t state_dim() const { return normalizer.dim(); }
    std::size_t latent_dim() const { return koopman.dim(); }
    Matrix K() const { return assemble_K(koopman); }

    // Constant factors of the skip path.
    Matrix encoder_skip_basis() const;  // diag(scale) V_D, N x D
    Matrix decoder_skip_basis() const;  // V_D^T diag(scale)^{-1}, D x N

    std::vector<std::size_t> layer_widths() const;
    void validate() const;
};

Matrix encode(const KoopmanModel& model, const Matrix& z);
Matrix decode(const KoopmanModel& model, const Matrix& phi);

// Flat parameter order: encoder net, decoder net, L_enc, L_dec, zeta, sigma.
struct ParameterLayout {
    std::size_t encoder = 0, decoder = 0, encoder_linear = 0, decoder_linear = 0, zeta = 0, sigma = 0;
    std::size_t total() const { return encoder + decoder + encoder_linear + decoder_linear + zeta + sigma; }
};
ParameterLayout parameter_layout(const KoopmanModel& model);
std::vector<double> flatten(const KoopmanModel& model);
void unflatten(KoopmanModel& model, std::span<const double> flat);

struct ModelOptions {
    std::vector<std::size_t> layers;  // full autoencoder widths, odd length, middle = D
    bool svd_embedding = true;
    double init_stddev = 0.1;
    std::uint64_t seed = 0;
};

// Splits "N-...-D-...-N" into encoder and decoder widths.
void split_autoencoder_widths(const std::vector<std::size_t>& layers, std::vector<std::size_t>& encoder,
                              std::vector<std::size_t>& decoder);

// Real basis P with K = P^{-1} G P in the block form of stable_from_spectrum
// (pairs first, then reals), plus the matching ordered spectrum.
struct RealBlockForm {
    ComplexSpectrum spectrum;
    Matrix basis;
    bool well_conditioned = true;
};
RealBlockForm real_block_form(const Matrix& g);

// SVD-DMD initialization: embedding from the centered snapshots, K from the
// DMD generator's spectrum (clamped to Re <= 0), networks truncated-normal.
KoopmanModel init_from_dmd(const Dataset& data, const Normalizer& normalizer, const ModelOptions& options);

// Continuous-time DMD spectrum (before clamping) and real block basis in the
// first `rank` SVD coordinates. Trajectory data needs a uniform step.
RealBlockForm dmd_block_form(const Dataset& data, const Normalizer& normalizer, const Matrix& svd_basis,
                             std::size_t rank);

// First D right singular vectors of already centered snapshots, zero padded
// beyond rank = min(N, D).
Matrix svd_embedding_basis(const Matrix& centered, std::size_t latent_dim, std::size_t& rank);

}  // namespace koopman
