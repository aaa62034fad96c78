#include <algorithm>
#include <cmath>

#include "koopman/errors.hpp"
#include "koopman/model.hpp"
#include "koopman/rng.hpp"

namespace koopman {

RealBlockForm real_block_form(const Matrix& g) {
    require_square(g, "real_block_form");
    const std::size_t n = g.rows();
    const ComplexSpectrum ev = eigenvalues(g);
    const double tol = 1e-12 * std::max(1.0, g.norm1());

    std::vector<bool> used(n, false);
    ComplexSpectrum pair_heads, reals;
    for (std::size_t i = 0; i < n; ++i) {
        if (used[i]) continue;
        used[i] = true;
        if (std::abs(ev[i].imag()) <= tol) {
            reals.emplace_back(ev[i].real(), 0.0);
            continue;
        }
        std::size_t best = n;
        for (std::size_t j = 0; j < n; ++j) {
            if (used[j] || (ev[j].imag() > 0.0) == (ev[i].imag() > 0.0)) continue;
            if (best == n || std::abs(ev[j] - std::conj(ev[i])) < std::abs(ev[best] - std::conj(ev[i]))) best = j;
        }
        if (best == n) throw NumericError("real_block_form: unpaired complex eigenvalue");
        used[best] = true;
        const Complex head = ev[i].imag() > 0.0 ? ev[i] : ev[best];
        pair_heads.push_back(Complex(0.5 * (ev[i].real() + ev[best].real()), std::abs(head.imag())));
    }

    ComplexSpectrum targets = pair_heads;
    targets.insert(targets.end(), reals.begin(), reals.end());
    const auto vecs = eigenvectors(g, targets);

    RealBlockForm out;
    out.basis = Matrix(n, n);
    std::size_t col = 0;
    for (std::size_t p = 0; p < pair_heads.size(); ++p) {
        std::vector<Complex> w = vecs[p];
        // Rotate the phase so that Re(w) and Im(w) are orthogonal.
        Complex ss{};
        for (const auto& x : w) ss += x * x;
        const Complex rot = std::polar(1.0, -0.5 * std::arg(ss));
        for (std::size_t i = 0; i < n; ++i) {
            const Complex x = w[i] * rot;
            out.basis(i, col) = x.real();
            out.basis(i, col + 1) = x.imag();
        }
        out.spectrum.push_back(pair_heads[p]);
        out.spectrum.push_back(std::conj(pair_heads[p]));
        col += 2;
    }
    for (std::size_t r = 0; r < reals.size(); ++r) {
        const auto& w = vecs[pair_heads.size() + r];
        double nn = 0.0;
        for (const auto& x : w) nn += x.real() * x.real();
        nn = std::sqrt(nn);
        for (std::size_t i = 0; i < n; ++i) out.basis(i, col) = nn > 0.0 ? w[i].real() / nn : 0.0;
        out.spectrum.push_back(reals[r]);
        ++col;
    }
    if (n > 0) {
        const auto svd = thin_svd(out.basis);
        out.well_conditioned = svd.s.back() > 1e-8 * svd.s.front();
    }
    return out;
}

Matrix svd_embedding_basis(const Matrix& centered, std::size_t latent_dim, std::size_t& rank) {
    const std::size_t n = centered.cols();
    rank = std::min(n, latent_dim);
    const SvdResult svd = thin_svd(centered);
    Matrix basis(n, latent_dim);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < rank && k < svd.v.cols(); ++k) basis(i, k) = svd.v(i, k);
    return basis;
}

namespace {

Matrix centered_projection(const Normalizer& normalizer, const Matrix& x, const Matrix& vr) {
    Matrix c = x;
    for (std::size_t r = 0; r < c.rows(); ++r)
        for (std::size_t k = 0; k < c.cols(); ++k) c(r, k) -= normalizer.mean[k];
    return matmul(c, vr);
}

}  // namespace

RealBlockForm dmd_block_form(const Dataset& data, const Normalizer& normalizer, const Matrix& svd_basis,
                             std::size_t rank) {
    const Matrix vr = svd_basis.block(0, 0, svd_basis.rows(), rank);
    if (data.kind == Dataset::Kind::derivative) {
        const Matrix q = centered_projection(normalizer, data.x, vr);
        const Matrix qdot = matmul(data.xdot, vr);
        // Row convention: qdot ~ q G.
        return real_block_form(matmul(pinv(q), qdot));
    }

    const double dt = uniform_step(data);
    std::vector<Matrix> before, after;
    for (const auto& tr : data.trajectories) {
        if (tr.x.rows() < 2) continue;
        const Matrix q = centered_projection(normalizer, tr.x, vr);
        before.push_back(q.block(0, 0, q.rows() - 1, rank));
        after.push_back(q.block(1, 0, q.rows() - 1, rank));
    }
    if (before.empty()) throw DataError("DMD needs at least one pair of consecutive snapshots");
    const Matrix a = matmul(pinv(vstack(before)), vstack(after));
    RealBlockForm form = real_block_form(a);
    // One-step multipliers mu to continuous-time rates log(mu) / dt. A
    // negative real multiplier keeps only its decay rate.
    for (auto& mu : form.spectrum) {
        const double mag = std::max(std::abs(mu), 1e-12);
        const double angle = mu.imag() == 0.0 ? 0.0 : std::arg(mu);
        mu = Complex(std::log(mag) / dt, angle / dt);
    }
    return form;
}

KoopmanModel init_from_dmd(const Dataset& data, const Normalizer& normalizer, const ModelOptions& options) {
    data.validate();
    normalizer.validate();
    const std::size_t n = normalizer.dim();
    if (data.state_dim() != n)
        throw DimensionError("init_from_dmd: dataset width " + std::to_string(data.state_dim()) +
                             " differs from normalizer width " + std::to_string(n));
    if (data.sample_count() < 2) throw DataError("init_from_dmd: need at least 2 snapshots");

    std::vector<std::size_t> enc_w, dec_w;
    split_autoencoder_widths(options.layers, enc_w, dec_w);
    if (enc_w.front() != n)
        throw UsageError("layer widths start with " + std::to_string(enc_w.front()) + " but the state has " +
                         std::to_string(n) + " components");
    const std::size_t d = enc_w.back();

    KoopmanModel model;
    model.normalizer = normalizer;
    model.svd_embedding = options.svd_embedding;
    model.encoder = init_truncated_normal(enc_w, Rng::split(options.seed, 1).next_u64(), options.init_stddev);
    model.decoder = init_truncated_normal(dec_w, Rng::split(options.seed, 2).next_u64(), options.init_stddev);

    Matrix centered = data.snapshots();
    for (std::size_t r = 0; r < centered.rows(); ++r)
        for (std::size_t c = 0; c < n; ++c) centered(r, c) -= normalizer.mean[c];
    std::size_t rank = 0;
    model.svd_basis = svd_embedding_basis(centered, d, rank);

    const RealBlockForm form = dmd_block_form(data, normalizer, model.svd_basis, rank);
    ComplexSpectrum spectrum = form.spectrum;
    for (auto& l : spectrum) l = Complex(std::min(l.real(), 0.0), l.imag());
    spectrum.resize(d, Complex(0.0, 0.0));
    model.koopman = stable_from_spectrum(spectrum);

    model.encoder_linear = Matrix::identity(d);
    model.decoder_linear = Matrix::identity(d);
    if (options.svd_embedding && form.well_conditioned) {
        model.encoder_linear.set_block(0, 0, form.basis);
        model.decoder_linear.set_block(0, 0, inverse(form.basis));
    }
    model.validate();
    return model;
}

}  // namespace koopman
