#include "koopman/model.hpp"

#include <algorithm>
#include <cmath>

#include "koopman/errors.hpp"

namespace koopman {

std::string to_string(NormalizationMode mode) {
    return mode == NormalizationMode::per_component ? "per-component" : "global-max";
}

NormalizationMode parse_normalization_mode(const std::string& text) {
    if (text == "per-component" || text == "per_component") return NormalizationMode::per_component;
    if (text == "global-max" || text == "global_max") return NormalizationMode::global_max;
    throw UsageError("unknown normalization mode '" + text + "' (expected per-component or global-max)");
}

Matrix Normalizer::normalize(const Matrix& x) const {
    if (x.cols() != dim()) throw DimensionError("normalize: width " + std::to_string(x.cols()) + ", expected " + std::to_string(dim()));
    Matrix z(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < x.cols(); ++c) z(r, c) = (x(r, c) - mean[c]) / scale[c];
    return z;
}

Matrix Normalizer::denormalize(const Matrix& z) const {
    if (z.cols() != dim()) throw DimensionError("denormalize: width " + std::to_string(z.cols()) + ", expected " + std::to_string(dim()));
    Matrix x(z.rows(), z.cols());
    for (std::size_t r = 0; r < z.rows(); ++r)
        for (std::size_t c = 0; c < z.cols(); ++c) x(r, c) = z(r, c) * scale[c] + mean[c];
    return x;
}

Matrix Normalizer::normalize_rate(const Matrix& xdot) const {
    if (xdot.cols() != dim()) throw DimensionError("normalize_rate: width mismatch");
    Matrix zd(xdot.rows(), xdot.cols());
    for (std::size_t r = 0; r < xdot.rows(); ++r)
        for (std::size_t c = 0; c < xdot.cols(); ++c) zd(r, c) = xdot(r, c) / scale[c];
    return zd;
}

void Normalizer::validate() const {
    if (mean.size() != scale.size() || mean.empty()) throw DimensionError("normalizer: mean/scale size mismatch");
    for (double s : scale)
        if (!(s > 0.0) || !std::isfinite(s)) throw DataError("normalizer: scale entries must be positive");
    for (double m : mean)
        if (!std::isfinite(m)) throw DataError("normalizer: non-finite mean");
}

Normalizer Normalizer::identity(std::size_t n) {
    return Normalizer{std::vector<double>(n, 0.0), std::vector<double>(n, 1.0), NormalizationMode::per_component};
}

Normalizer fit_normalizer(const Matrix& x, NormalizationMode mode) {
    const std::size_t m = x.rows(), n = x.cols();
    if (m < 2) throw DataError("fit_normalizer: need at least 2 snapshots");
    if (!x.all_finite()) throw DataError("fit_normalizer: non-finite snapshot values");
    Normalizer out;
    out.mode = mode;
    out.mean.assign(n, 0.0);
    out.scale.assign(n, 0.0);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) out.mean[c] += x(r, c);
    for (double& v : out.mean) v /= static_cast<double>(m);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) {
            const double d = x(r, c) - out.mean[c];
            out.scale[c] += d * d;
        }
    for (double& v : out.scale) v = std::sqrt(v / static_cast<double>(m));
    if (mode == NormalizationMode::per_component) {
        for (std::size_t c = 0; c < n; ++c)
            if (!(out.scale[c] > 0.0))
                throw DataError("fit_normalizer: degenerate scale, component " + std::to_string(c + 1) +
                                " has zero variance (use global-max normalization)");
    } else {
        const double dmax = *std::max_element(out.scale.begin(), out.scale.end());
        if (!(dmax > 0.0)) throw DataError("fit_normalizer: degenerate scale, all components constant");
        std::fill(out.scale.begin(), out.scale.end(), dmax);
    }
    return out;
}

void StableKoopman::validate() const {
    if (sigma.empty()) throw DimensionError("StableKoopman: latent dimension must be at least 1");
    if (zeta.size() + 1 != sigma.size())
        throw DimensionError("StableKoopman: zeta needs D-1 = " + std::to_string(sigma.size() - 1) + " entries");
}

Matrix assemble_K(const StableKoopman& k) {
    k.validate();
    const std::size_t d = k.dim();
    Matrix m(d, d);
    for (std::size_t i = 0; i < d; ++i) m(i, i) = -k.sigma[i] * k.sigma[i];
    for (std::size_t i = 0; i + 1 < d; ++i) {
        m(i, i + 1) = k.zeta[i];
        m(i + 1, i) = -k.zeta[i];
    }
    return m;
}

StableKoopman stable_from_spectrum(const ComplexSpectrum& target, double tol) {
    const std::size_t d = target.size();
    if (d == 0) throw DimensionError("stable_from_spectrum: empty spectrum");
    for (const auto& l : target)
        if (l.real() > tol)
            throw DomainError("stable_from_spectrum: eigenvalue with positive real part " + std::to_string(l.real()));

    std::vector<bool> used(d, false);
    std::vector<std::pair<double, double>> pairs;  // (real, |imag|)
    std::vector<double> reals;
    for (std::size_t i = 0; i < d; ++i) {
        if (used[i]) continue;
        const Complex l = target[i];
        if (std::abs(l.imag()) <= tol * std::max(1.0, std::abs(l))) {
            used[i] = true;
            reals.push_back(std::min(l.real(), 0.0));
            continue;
        }
        std::size_t best = d;
        double best_err = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            if (used[j] || j == i || (target[j].imag() > 0.0) == (l.imag() > 0.0)) continue;
            const double err = std::abs(target[j] - std::conj(l));
            if (best == d || err < best_err) {
                best = j;
                best_err = err;
            }
        }
        if (best == d || best_err > 1e-9 * (1.0 + std::abs(l)))
            throw DomainError("stable_from_spectrum: spectrum is not closed under conjugation");
        used[i] = used[best] = true;
        pairs.emplace_back(std::min(0.5 * (l.real() + target[best].real()), 0.0), std::abs(l.imag()));
    }

    StableKoopman k;
    k.sigma.assign(d, 0.0);
    k.zeta.assign(d - 1, 0.0);
    std::size_t pos = 0;
    for (const auto& [re, im] : pairs) {
        k.sigma[pos] = k.sigma[pos + 1] = std::sqrt(-re);
        k.zeta[pos] = im;
        pos += 2;
    }
    for (double re : reals) k.sigma[pos++] = std::sqrt(-re);
    return k;
}

Matrix KoopmanModel::encoder_skip_basis() const {
    Matrix b = svd_basis;
    for (std::size_t r = 0; r < b.rows(); ++r)
        for (std::size_t c = 0; c < b.cols(); ++c) b(r, c) *= normalizer.scale[r];
    return b;
}

Matrix KoopmanModel::decoder_skip_basis() const {
    Matrix b = svd_basis.transpose();
    for (std::size_t r = 0; r < b.rows(); ++r)
        for (std::size_t c = 0; c < b.cols(); ++c) b(r, c) /= normalizer.scale[c];
    return b;
}

std::vector<std::size_t> KoopmanModel::layer_widths() const {
    std::vector<std::size_t> w = encoder.widths;
    w.insert(w.end(), decoder.widths.begin() + 1, decoder.widths.end());
    return w;
}

void KoopmanModel::validate() const {
    normalizer.validate();
    koopman.validate();
    encoder.validate();
    decoder.validate();
    const std::size_t n = state_dim(), d = latent_dim();
    if (encoder.input_width() != n || encoder.output_width() != d)
        throw DimensionError("encoder widths must map N=" + std::to_string(n) + " to D=" + std::to_string(d));
    if (decoder.input_width() != d || decoder.output_width() != n)
        throw DimensionError("decoder widths must map D=" + std::to_string(d) + " to N=" + std::to_string(n));
    if (svd_basis.rows() != n || svd_basis.cols() != d) throw DimensionError("svd basis must be N x D");
    if (encoder_linear.rows() != d || encoder_linear.cols() != d || decoder_linear.rows() != d ||
        decoder_linear.cols() != d)
        throw DimensionError("linear skip maps must be D x D");
}

Matrix encode(const KoopmanModel& model, const Matrix& z) {
    if (z.cols() != model.state_dim())
        throw DimensionError("encode: width " + std::to_string(z.cols()) + ", expected " + std::to_string(model.state_dim()));
    Matrix phi = forward(model.encoder, z);
    if (model.svd_embedding) phi += matmul(z, matmul(model.encoder_skip_basis(), model.encoder_linear));
    return phi;
}

Matrix decode(const KoopmanModel& model, const Matrix& phi) {
    if (phi.cols() != model.latent_dim())
        throw DimensionError("decode: width " + std::to_string(phi.cols()) + ", expected " + std::to_string(model.latent_dim()));
    Matrix z = forward(model.decoder, phi);
    if (model.svd_embedding) z += matmul(phi, matmul(model.decoder_linear, model.decoder_skip_basis()));
    return z;
}

ParameterLayout parameter_layout(const KoopmanModel& model) {
    ParameterLayout p;
    p.encoder = model.encoder.parameter_count();
    p.decoder = model.decoder.parameter_count();
    p.encoder_linear = model.encoder_linear.size();
    p.decoder_linear = model.decoder_linear.size();
    p.zeta = model.koopman.zeta.size();
    p.sigma = model.koopman.sigma.size();
    return p;
}

std::vector<double> flatten(const KoopmanModel& model) {
    std::vector<double> out = flatten(model.encoder);
    const auto dec = flatten(model.decoder);
    out.insert(out.end(), dec.begin(), dec.end());
    out.insert(out.end(), model.encoder_linear.values().begin(), model.encoder_linear.values().end());
    out.insert(out.end(), model.decoder_linear.values().begin(), model.decoder_linear.values().end());
    out.insert(out.end(), model.koopman.zeta.begin(), model.koopman.zeta.end());
    out.insert(out.end(), model.koopman.sigma.begin(), model.koopman.sigma.end());
    return out;
}

void unflatten(KoopmanModel& model, std::span<const double> flat) {
    const ParameterLayout p = parameter_layout(model);
    if (flat.size() != p.total()) throw DimensionError("unflatten: parameter count mismatch");
    std::size_t k = 0;
    unflatten(model.encoder, flat.subspan(k, p.encoder));
    k += p.encoder;
    unflatten(model.decoder, flat.subspan(k, p.decoder));
    k += p.decoder;
    for (double& v : model.encoder_linear.values()) v = flat[k++];
    for (double& v : model.decoder_linear.values()) v = flat[k++];
    for (double& v : model.koopman.zeta) v = flat[k++];
    for (double& v : model.koopman.sigma) v = flat[k++];
}

void split_autoencoder_widths(const std::vector<std::size_t>& layers, std::vector<std::size_t>& encoder,
                              std::vector<std::size_t>& decoder) {
    if (layers.size() < 3 || layers.size() % 2 == 0)
        throw UsageError("autoencoder layers '" + format_widths(layers) +
                         "' must have odd length with the latent width in the middle");
    if (layers.front() != layers.back())
        throw UsageError("autoencoder layers '" + format_widths(layers) + "' must start and end with the state width");
    const std::size_t mid = layers.size() / 2;
    encoder.assign(layers.begin(), layers.begin() + static_cast<std::ptrdiff_t>(mid) + 1);
    decoder.assign(layers.begin() + static_cast<std::ptrdiff_t>(mid), layers.end());
}

}  // namespace koopman
