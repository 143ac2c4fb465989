#pragma once

#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "scfa/tensor.hpp"

namespace scfa {

constexpr double kNormEps = 1e-12;

// ---------------------------------------------------------------------------
// Embedding batch: 2N projection rows with sibling metadata. Rows 2j and
// 2j+1 are the two temporal views of video j.
// ---------------------------------------------------------------------------
struct EmbeddingBatch {
    Tensor z;                          // 2N x D
    std::vector<int> labels;           // 2N
    std::vector<std::string> video_ids;
    std::vector<int> view_ids;         // alternating 0, 1

    std::size_t size() const { return z.rows(); }
    std::size_t dim() const { return z.cols(); }

    // Enforces the sibling structure the trainer guarantees: even row count,
    // consistent metadata arrays, and paired rows sharing video id and label.
    void validate() const {
        const std::size_t n = size();
        if (n == 0 || n % 2 != 0) {
            throw std::invalid_argument("EmbeddingBatch: row count must be even and positive");
        }
        if (labels.size() != n || video_ids.size() != n || view_ids.size() != n) {
            throw std::invalid_argument("EmbeddingBatch: metadata arrays must have 2N entries");
        }
        for (std::size_t j = 0; j < n; j += 2) {
            if (video_ids[j] != video_ids[j + 1] || labels[j] != labels[j + 1] ||
                view_ids[j] == view_ids[j + 1]) {
                throw std::invalid_argument("EmbeddingBatch: rows " + std::to_string(j) + "," +
                                            std::to_string(j + 1) + " are not sibling views");
            }
        }
    }
};

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

// v / max(||v||, eps). The epsilon guard maps the zero vector to itself.
inline std::vector<double> l2_normalize(const std::vector<double>& v) {
    double nsq = 0.0;
    for (double x : v) nsq += x * x;
    const double inv = 1.0 / std::max(std::sqrt(nsq), kNormEps);
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * inv;
    return out;
}

inline Tensor l2_normalize_rows(const Tensor& m) {
    Tensor out(m.shape);
    const std::size_t rows = m.rows(), cols = m.cols();
    for (std::size_t i = 0; i < rows; ++i) {
        double nsq = 0.0;
        for (std::size_t j = 0; j < cols; ++j) nsq += m.at(i, j) * m.at(i, j);
        const double inv = 1.0 / std::max(std::sqrt(nsq), kNormEps);
        for (std::size_t j = 0; j < cols; ++j) out.at(i, j) = m.at(i, j) * inv;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pairwise similarity
// ---------------------------------------------------------------------------

// S[i][j] = dot(z_i, z_j) / tau on unit-norm rows. Computed on the upper
// triangle and mirrored, so the result is exactly symmetric.
inline Tensor similarity_matrix(const Tensor& z, double tau) {
    if (tau <= 0.0) throw std::invalid_argument("similarity_matrix: tau must be positive");
    const std::size_t n = z.rows(), d = z.cols();
    Tensor s({n, n});
    const double inv_tau = 1.0 / tau;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < d; ++k) dot += z.at(i, k) * z.at(j, k);
            s.at(i, j) = dot * inv_tau;
            s.at(j, i) = s.at(i, j);
        }
    }
    return s;
}

// ---------------------------------------------------------------------------
// Positive set
// ---------------------------------------------------------------------------

// M[i][j] true iff j != i and (same label or same video). Same video implies
// same label in a well-formed batch, so off the diagonal this is label
// equality plus the sibling link for any externally supplied metadata.
struct PositiveMask {
    std::size_t n = 0;
    std::vector<char> m;  // row-major n x n

    bool at(std::size_t i, std::size_t j) const { return m[i * n + j] != 0; }
    std::size_t count_row(std::size_t i) const {
        std::size_t c = 0;
        for (std::size_t j = 0; j < n; ++j) c += at(i, j);
        return c;
    }
};

inline PositiveMask positive_mask(const std::vector<int>& labels,
                                  const std::vector<std::string>& video_ids,
                                  const std::vector<int>& view_ids) {
    const std::size_t n = labels.size();
    if (video_ids.size() != n || view_ids.size() != n) {
        throw std::invalid_argument("positive_mask: array lengths differ (" + std::to_string(n) +
                                    ", " + std::to_string(video_ids.size()) + ", " +
                                    std::to_string(view_ids.size()) + ")");
    }
    PositiveMask mask;
    mask.n = n;
    mask.m.assign(n * n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            mask.m[i * n + j] = (labels[i] == labels[j] || video_ids[i] == video_ids[j]) ? 1 : 0;
        }
    }
    return mask;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

namespace detail {

// log sum_{j in set} exp(s_j), stabilized by the max over the same set.
// Keeping a separate max per set means the numerator cannot underflow to
// -inf even when its terms sit far below the batch maximum.
inline double log_sum_exp_masked(const Tensor& s, std::size_t row, const char* mask,
                                 std::size_t n) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
        if (mask[j] && s.at(row, j) > m) m = s.at(row, j);
    if (!std::isfinite(m)) return -std::numeric_limits<double>::infinity();  // empty set
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j)
        if (mask[j]) acc += std::exp(s.at(row, j) - m);
    return m + std::log(acc);
}

inline void warn_empty_positive_rows(std::size_t count, std::size_t n) {
    std::cerr << "warning: " << count << " of " << n
              << " batch rows have no positives; they contribute zero loss and gradient\n";
}

}  // namespace detail

struct LossResult {
    double value = 0.0;
    Tensor grad;  // 2N x D, with respect to the pre-normalization projections
};

namespace detail {

struct ScfaTerms {
    double value = 0.0;
    Tensor coeff;  // 2N x 2N: d(loss)/d(S_ij), zero diagonal
};

// Shared evaluation of the supervised contrastive objective on normalized
// rows: per anchor, -log of (sum of positive-pair exponentials / sum of all
// non-self exponentials), averaged over the 2N anchors. Rows whose positive
// set is empty contribute nothing.
inline ScfaTerms scfa_terms(const Tensor& z, const std::vector<int>& labels,
                            const std::vector<std::string>& video_ids,
                            const std::vector<int>& view_ids, double tau, bool want_coeff) {
    if (tau <= 0.0) throw std::invalid_argument("scfa_loss: tau must be positive");
    const std::size_t n = z.rows();
    if (n == 0 || n % 2 != 0) {
        throw std::invalid_argument("scfa_loss: batch must contain a positive, even row count");
    }
    const PositiveMask pos = positive_mask(labels, video_ids, view_ids);
    const Tensor s = similarity_matrix(z, tau);

    std::vector<char> not_self(n);
    ScfaTerms out;
    if (want_coeff) out.coeff = Tensor({n, n});

    double total = 0.0;
    std::size_t empty_rows = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const char* pos_row = pos.m.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) not_self[j] = (j != i);

        if (pos.count_row(i) == 0) {
            ++empty_rows;
            continue;
        }
        const double lse_pos = log_sum_exp_masked(s, i, pos_row, n);
        const double lse_all = log_sum_exp_masked(s, i, not_self.data(), n);
        total += lse_all - lse_pos;

        if (want_coeff) {
            // d(row loss)/dS_ij = softmax over all non-self minus softmax
            // over the positives, scaled later by 1/(2N).
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                const double q = std::exp(s.at(i, j) - lse_all);
                const double p = pos_row[j] ? std::exp(s.at(i, j) - lse_pos) : 0.0;
                out.coeff.at(i, j) = q - p;
            }
        }
    }
    if (empty_rows > 0) warn_empty_positive_rows(empty_rows, n);

    // The positive sum is a subset of the denominator, so the exact value is
    // nonnegative; clamp away any residual cancellation at the zero boundary.
    out.value = std::max(0.0, total / static_cast<double>(n));
    return out;
}

}  // namespace detail

// Supervised contrastive loss on normalized projection rows. Positives for
// an anchor are its sibling view and every row sharing its class label.
inline double scfa_loss(const Tensor& z, const std::vector<int>& labels,
                        const std::vector<std::string>& video_ids,
                        const std::vector<int>& view_ids, double tau) {
    return detail::scfa_terms(z, labels, video_ids, view_ids, tau, /*want_coeff=*/false).value;
}

// Loss value plus the analytic gradient with respect to the raw
// (pre-normalization) projections: the rows are normalized internally and
// the normalization Jacobian is folded into the returned gradient, which is
// what backpropagates into the projection head.
inline LossResult scfa_loss_grad(const Tensor& projections, const std::vector<int>& labels,
                                 const std::vector<std::string>& video_ids,
                                 const std::vector<int>& view_ids, double tau) {
    const std::size_t n = projections.rows(), d = projections.cols();
    const Tensor z = l2_normalize_rows(projections);
    detail::ScfaTerms terms =
        detail::scfa_terms(z, labels, video_ids, view_ids, tau, /*want_coeff=*/true);

    // dL/dz = (C + C^T) z / (2N * tau) where C is the coefficient matrix.
    Tensor grad_z({n, d});
    const double scale = 1.0 / (static_cast<double>(n) * tau);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double c = (terms.coeff.at(i, j) + terms.coeff.at(j, i)) * scale;
            if (c == 0.0) continue;
            for (std::size_t k = 0; k < d; ++k) grad_z.at(i, k) += c * z.at(j, k);
        }
    }

    // Chain through z = u / max(||u||, eps).
    LossResult res;
    res.value = terms.value;
    res.grad = Tensor({n, d});
    for (std::size_t i = 0; i < n; ++i) {
        double nsq = 0.0;
        for (std::size_t k = 0; k < d; ++k) nsq += projections.at(i, k) * projections.at(i, k);
        const double norm = std::sqrt(nsq);
        if (norm > kNormEps) {
            double dot = 0.0;
            for (std::size_t k = 0; k < d; ++k) dot += grad_z.at(i, k) * z.at(i, k);
            for (std::size_t k = 0; k < d; ++k) {
                res.grad.at(i, k) = (grad_z.at(i, k) - dot * z.at(i, k)) / norm;
            }
        } else {
            for (std::size_t k = 0; k < d; ++k) res.grad.at(i, k) = grad_z.at(i, k) / kNormEps;
        }
    }
    return res;
}

// Self-supervised specialization: the only positive for an anchor is its
// sibling view, the denominator runs over every other row. Mean of the
// per-anchor terms over all 2N anchors.
inline double ntxent_loss(const Tensor& z, double tau) {
    if (tau <= 0.0) throw std::invalid_argument("ntxent_loss: tau must be positive");
    const std::size_t n = z.rows();
    if (n == 0 || n % 2 != 0) {
        throw std::invalid_argument("ntxent_loss: batch must contain a positive, even row count");
    }
    const Tensor s = similarity_matrix(z, tau);

    std::vector<char> not_self(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t sib = (i % 2 == 0) ? i + 1 : i - 1;
        for (std::size_t j = 0; j < n; ++j) not_self[j] = (j != i);
        const double lse_all = detail::log_sum_exp_masked(s, i, not_self.data(), n);
        total += lse_all - s.at(i, sib);
    }
    return std::max(0.0, total / static_cast<double>(n));
}

}  // namespace scfa
