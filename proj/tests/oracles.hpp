#pragma once

// Straight-line scalar recomputations used as independent references in tests. Nothing here
// calls into the library; inputs are plain nested vectors.

#include <algorithm>
#include <cmath>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

inline double clampp(double p) { return std::min(std::max(p, 1e-7), 1.0 - 1e-7); }

inline double cosine_weight(const Vec& z, const Vec& c) {
    double dot = 0, nz = 0, nc = 0;
    for (std::size_t j = 0; j < z.size(); ++j) {
        dot += z[j] * c[j];
        nz += z[j] * z[j];
        nc += c[j] * c[j];
    }
    if (nz == 0 || nc == 0) return 0.5;
    double w = 0.5 * (1.0 + dot / (std::sqrt(nz) * std::sqrt(nc)));
    return std::min(1.0, std::max(0.0, w));
}

inline Vec softmax(const Vec& logits) {
    double m = logits[0];
    for (double l : logits) m = std::max(m, l);
    Vec p(logits.size());
    double s = 0;
    for (std::size_t k = 0; k < logits.size(); ++k) s += (p[k] = std::exp(logits[k] - m));
    for (double& v : p) v /= s;
    return p;
}

inline Vec normalize_classes(const Vec& p) {
    const std::size_t k = p.size() - 1;
    double s = 0;
    for (std::size_t j = 0; j < k; ++j) s += p[j];
    Vec out(k);
    for (std::size_t j = 0; j < k; ++j) out[j] = p[j] / s;
    return out;
}

// q_ik = [p_ik / sqrt(sum_i' p_i'k)] / sum_k' [p_ik' / sqrt(sum_i' p_i'k')]
inline Mat auxiliary(const Mat& p) {
    const std::size_t n = p.size(), k = p[0].size();
    Vec col(k, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j) col[j] += p[i][j];
    Mat q(n, Vec(k));
    for (std::size_t i = 0; i < n; ++i) {
        double denom = 0;
        for (std::size_t j = 0; j < k; ++j) denom += col[j] > 0 ? p[i][j] / std::sqrt(col[j]) : 0.0;
        for (std::size_t j = 0; j < k; ++j) q[i][j] = (col[j] > 0 ? p[i][j] / std::sqrt(col[j]) : 0.0) / denom;
    }
    return q;
}

inline double cluster_mean(const Vec& w, const std::vector<int>& a, int k) {
    double s = 0;
    int n = 0;
    for (std::size_t i = 0; i < w.size(); ++i)
        if (a[i] == k) {
            s += w[i];
            ++n;
        }
    return s / n;
}

inline double cluster_threshold(const Vec& w, const std::vector<int>& a, int k) {
    const double m = cluster_mean(w, a, k);
    double s2 = 0;
    int n = 0;
    for (std::size_t i = 0; i < w.size(); ++i)
        if (a[i] == k) {
            s2 += w[i] * w[i];
            ++n;
        }
    return m - std::sqrt(std::max(0.0, s2 / n - m * m));
}

inline double adv_g(const Vec& ps, const Vec& ws, const Vec& pt, const Vec& wt) {
    double a = 0, b = 0;
    for (std::size_t i = 0; i < ps.size(); ++i) a += ws[i] * std::log(clampp(ps[i]));
    for (std::size_t i = 0; i < pt.size(); ++i) b += wt[i] * std::log(1.0 - clampp(pt[i]));
    return -a / ps.size() - b / pt.size();
}

inline double adv_f(const Vec& ps, const Vec& ws, const Vec& pt, const Vec& wt) {
    double a = 0, b = 0;
    for (std::size_t i = 0; i < ps.size(); ++i) a += ws[i] * std::log(1.0 - clampp(ps[i]));
    for (std::size_t i = 0; i < pt.size(); ++i) b += wt[i] * std::log(clampp(pt[i]));
    return -a / ps.size() - b / pt.size();
}

// Weighted soft-label cross-entropy (no selection).
inline double soft_label_ce(const Mat& pn, const Mat& q, const Vec& w) {
    double s = 0;
    for (std::size_t i = 0; i < pn.size(); ++i)
        for (std::size_t k = 0; k < pn[i].size(); ++k)
            if (q[i][k] != 0) s += w[i] * q[i][k] * std::log(clampp(pn[i][k]));
    return -s / pn.size();
}

// Selection-aware version; tau indexed by the sample's cluster.
inline double selective_ce(const Mat& pn, const Mat& q, const Vec& w, const std::vector<int>& a, const Vec& tau) {
    double s = 0;
    for (std::size_t i = 0; i < pn.size(); ++i) {
        const bool pos = w[i] >= tau[a[i]];
        for (std::size_t k = 0; k < pn[i].size(); ++k) {
            if (q[i][k] == 0) continue;
            if (pos)
                s += w[i] * q[i][k] * std::log(clampp(pn[i][k]));
            else
                s += (1 - w[i]) * q[i][k] * std::log(1 - clampp(pn[i][k]));
        }
    }
    return -s / pn.size();
}

inline double source_ce(const Mat& pn, const std::vector<int>& y, const Vec& w) {
    double s = 0;
    for (std::size_t i = 0; i < pn.size(); ++i) s += w[i] * std::log(clampp(pn[i][y[i]]));
    return -s / pn.size();
}

// Dense layer forward with scalar loops; W is out x in.
inline Vec dense(const Mat& W, const Vec& b, const Vec& x) {
    Vec y(W.size());
    for (std::size_t o = 0; o < W.size(); ++o) {
        double s = b[o];
        for (std::size_t i = 0; i < x.size(); ++i) s += W[o][i] * x[i];
        y[o] = s;
    }
    return y;
}

}  // namespace oracle
