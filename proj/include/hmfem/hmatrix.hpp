#pragma once

// H-matrix format, blockwise truncated SVD of the explicit inverse, and the
// quantities reported by the rank sweep.

#include <hmfem/clustering.hpp>
#include <hmfem/detail/common.hpp>
#include <hmfem/fem.hpp>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <Eigen/SparseLU>

#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <vector>

namespace hmfem {

inline constexpr std::size_t default_dense_budget = 10000;

/// Explicit inverse via sparse LU, one column at a time.
/// Refuses when N exceeds the budget; verifies ||A M - I||_max on 10 random columns.
inline DenseMatrix invert_dense(const SparseMatrix& a, std::size_t budget = default_dense_budget,
                                std::uint64_t seed = 1)
{
    detail::require(a.rows() == a.cols(), "invert_dense: matrix must be square");
    const auto n = std::size_t(a.rows());
    if (n > budget) {
        std::ostringstream os;
        os << "dense inverse refused: N = " << n << " exceeds budget " << budget << " (needs "
           << double(n) * double(n) * 8.0 / 1e9 << " GB)";
        throw NumericalError(os.str());
    }
    if (n == 0)
        return DenseMatrix(0, 0);
    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success)
        throw NumericalError("invert_dense: factorization failed (matrix singular?)");
    DenseMatrix m(a.rows(), a.cols());
    constexpr Eigen::Index chunk = 64;
    for (Eigen::Index c = 0; c < a.cols(); c += chunk) {
        const Eigen::Index w = std::min(chunk, a.cols() - c);
        DenseMatrix rhs = DenseMatrix::Zero(a.rows(), w);
        for (Eigen::Index k = 0; k < w; ++k)
            rhs(c + k, k) = 1.0;
        m.middleCols(c, w) = lu.solve(rhs);
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<Eigen::Index> pick(0, a.cols() - 1);
    for (int k = 0; k < 10; ++k) {
        const Eigen::Index j = pick(rng);
        Vector r = a * m.col(j);
        r(j) -= 1.0;
        if (!(r.cwiseAbs().maxCoeff() <= 1e-8))
            throw NumericalError("invert_dense: residual check failed on column " + std::to_string(j));
    }
    return m;
}

struct LowRankBlock
{
    std::vector<std::size_t> rows, cols;
    DenseMatrix x;          // |I| x k
    DenseMatrix y;          // |J| x k, block = x y^T
    Vector sigma;           // retained singular values
    double sigma_next = 0;  // first discarded singular value, 0 if exact

    std::size_t rank() const { return std::size_t(x.cols()); }
};

struct DenseBlock
{
    std::vector<std::size_t> rows, cols;
    DenseMatrix values;
};

struct HMatrix
{
    std::size_t n = 0;
    std::size_t rank_bound = 0;
    std::size_t block_tree_depth = 0;
    std::vector<LowRankBlock> low_rank;
    std::vector<DenseBlock> dense;
};

inline DenseMatrix extract_block(const DenseMatrix& m, const std::vector<std::size_t>& rows,
                                 const std::vector<std::size_t>& cols)
{
    DenseMatrix b(Eigen::Index(rows.size()), Eigen::Index(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j)
        for (std::size_t i = 0; i < rows.size(); ++i)
            b(Eigen::Index(i), Eigen::Index(j)) = m(Eigen::Index(rows[i]), Eigen::Index(cols[j]));
    return b;
}

using ExtendedMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

/// Thin SVD of one block, truncated to at most max_rank leading triplets.
/// x = U_k Sigma_k and y = V_k are stored in double; the full singular
/// spectrum is kept. Each left vector's first nonzero entry is positive.
struct BlockSvd
{
    DenseMatrix x, y;
    Vector sigma;
};

/// One-sided Jacobi in extended precision. Its backward error sits far below
/// double rounding, so the stored factors reproduce the block to O(eps |B|)
/// and the discarded singular values remain upper bounds near the noise floor.
inline BlockSvd block_svd(const DenseMatrix& b, std::size_t max_rank = std::numeric_limits<std::size_t>::max())
{
    const ExtendedMatrix be = b.cast<long double>();
    Eigen::JacobiSVD<ExtendedMatrix> svd(be, Eigen::ComputeThinU | Eigen::ComputeThinV);
    ExtendedMatrix u = svd.matrixU(), v = svd.matrixV();
    const auto& s = svd.singularValues();
    const Eigen::Index k = std::min<Eigen::Index>(s.size(), Eigen::Index(std::min<std::size_t>(max_rank, 1u << 30)));
    for (Eigen::Index c = 0; c < k; ++c) {
        Eigen::Index first = 0;
        while (first < u.rows() && u(first, c) == 0.0L)
            ++first;
        if (first < u.rows() && u(first, c) < 0) {
            u.col(c) *= -1;
            v.col(c) *= -1;
        }
    }
    BlockSvd out;
    out.x = (u.leftCols(k) * s.head(k).asDiagonal()).cast<double>();
    out.y = v.leftCols(k).cast<double>();
    out.sigma = s.cast<double>();
    return out;
}

/// SVDs of every admissible block plus copies of the small blocks, so that a
/// rank sweep truncates without refactoring.
struct BlockSvdCache
{
    std::size_t n = 0;
    std::size_t block_tree_depth = 0;
    std::size_t max_rank = 0;
    std::vector<std::vector<std::size_t>> adm_rows, adm_cols;
    std::vector<BlockSvd> svds;
    std::vector<DenseBlock> dense;

    std::size_t max_min_dim() const
    {
        std::size_t r = 0;
        for (const auto& s : svds)
            r = std::max(r, std::size_t(s.sigma.size()));
        return r;
    }
};

inline BlockSvdCache build_svd_cache(const DenseMatrix& m, const BlockPartition& p,
                                     std::size_t max_rank = std::numeric_limits<std::size_t>::max())
{
    detail::require(std::size_t(m.rows()) == p.tree->num_indices() && m.rows() == m.cols(),
                    "compress: matrix size does not match the partition");
    BlockSvdCache c;
    c.n = std::size_t(m.rows());
    c.block_tree_depth = p.depth;
    c.max_rank = max_rank;
    for (const auto& b : p.blocks) {
        if (b.admissible) {
            c.adm_rows.push_back(p.rows(b));
            c.adm_cols.push_back(p.cols(b));
        } else {
            c.dense.push_back({p.rows(b), p.cols(b), extract_block(m, p.rows(b), p.cols(b))});
        }
    }
    c.svds.resize(c.adm_rows.size());
    detail::parallel_for(c.svds.size(), [&](std::size_t k) {
        c.svds[k] = block_svd(extract_block(m, c.adm_rows[k], c.adm_cols[k]), max_rank);
    });
    return c;
}

inline HMatrix compress(const BlockSvdCache& c, std::size_t r)
{
    detail::require(r >= 1, "compress: rank bound must be >= 1");
    detail::require(r <= c.max_rank, "compress: rank bound exceeds the cached rank");
    HMatrix h;
    h.n = c.n;
    h.rank_bound = r;
    h.block_tree_depth = c.block_tree_depth;
    h.dense = c.dense;
    h.low_rank.reserve(c.svds.size());
    for (std::size_t k = 0; k < c.svds.size(); ++k) {
        const auto& s = c.svds[k];
        const auto kk = std::min<Eigen::Index>(Eigen::Index(r), s.sigma.size());
        LowRankBlock b;
        b.rows = c.adm_rows[k];
        b.cols = c.adm_cols[k];
        b.x = s.x.leftCols(kk);
        b.y = s.y.leftCols(kk);
        b.sigma = s.sigma.head(kk);
        b.sigma_next = kk < s.sigma.size() ? s.sigma(kk) : 0.0;
        h.low_rank.push_back(std::move(b));
    }
    return h;
}

inline HMatrix compress(const DenseMatrix& m, const BlockPartition& p, std::size_t r)
{
    return compress(build_svd_cache(m, p), r);
}

/// y = H x
inline Vector hmatvec(const HMatrix& h, const Vector& x, bool transpose = false)
{
    detail::require(std::size_t(x.size()) == h.n, "hmatvec: dimension mismatch");
    Vector y = Vector::Zero(x.size());
    auto gather = [&](const std::vector<std::size_t>& idx) {
        Vector v(Eigen::Index(idx.size()));
        for (std::size_t i = 0; i < idx.size(); ++i)
            v(Eigen::Index(i)) = x(Eigen::Index(idx[i]));
        return v;
    };
    auto scatter = [&](const std::vector<std::size_t>& idx, const Vector& v) {
        for (std::size_t i = 0; i < idx.size(); ++i)
            y(Eigen::Index(idx[i])) += v(Eigen::Index(i));
    };
    for (const auto& b : h.low_rank) {
        if (b.rank() == 0)
            continue;
        if (!transpose)
            scatter(b.rows, b.x * (b.y.transpose() * gather(b.cols)));
        else
            scatter(b.cols, b.y * (b.x.transpose() * gather(b.rows)));
    }
    for (const auto& b : h.dense) {
        if (!transpose)
            scatter(b.rows, b.values * gather(b.cols));
        else
            scatter(b.cols, b.values.transpose() * gather(b.rows));
    }
    return y;
}

inline DenseMatrix to_dense(const HMatrix& h)
{
    DenseMatrix m = DenseMatrix::Zero(Eigen::Index(h.n), Eigen::Index(h.n));
    auto put = [&](const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols, const DenseMatrix& b) {
        for (std::size_t j = 0; j < cols.size(); ++j)
            for (std::size_t i = 0; i < rows.size(); ++i)
                m(Eigen::Index(rows[i]), Eigen::Index(cols[j])) = b(Eigen::Index(i), Eigen::Index(j));
    };
    for (const auto& b : h.low_rank)
        put(b.rows, b.cols, b.x * b.y.transpose());
    for (const auto& b : h.dense)
        put(b.rows, b.cols, b.values);
    return m;
}

/// depth(block tree) * max over admissible blocks of sigma_{r+1}.
inline double computable_bound(const HMatrix& h)
{
    double s = 0;
    for (const auto& b : h.low_rank)
        s = std::max(s, b.sigma_next);
    return double(h.block_tree_depth) * s;
}

struct MemoryReport
{
    std::size_t factor_bytes = 0;  // 8 bytes per stored scalar
    std::size_t index_bytes = 0;   // row/column index lists
};

inline MemoryReport memory_report(const HMatrix& h)
{
    MemoryReport r;
    for (const auto& b : h.low_rank) {
        r.factor_bytes += 8 * b.rank() * (b.rows.size() + b.cols.size());
        r.index_bytes += sizeof(std::size_t) * (b.rows.size() + b.cols.size());
    }
    for (const auto& b : h.dense) {
        r.factor_bytes += 8 * b.rows.size() * b.cols.size();
        r.index_bytes += sizeof(std::size_t) * (b.rows.size() + b.cols.size());
    }
    return r;
}

inline std::size_t memory_bytes(const HMatrix& h) { return memory_report(h).factor_bytes; }

struct SpectralError
{
    double estimate = 0;   // power iteration on E^T E
    double frobenius = 0;  // ||E||_F, an upper bound
    std::size_t iterations = 0;
};

/// Estimate of ||M - H||_2 by power iteration on E^T E. E is applied block by
/// block as M|_{IxJ} - H|_{IxJ}, so the O(||M||) dense part never cancels
/// against the rounding floor of the low-rank part.
inline SpectralError spectral_error(const DenseMatrix& m, const HMatrix& h, std::size_t max_iterations = 300,
                                    double tol = 1e-10, std::uint64_t seed = 1)
{
    detail::require(std::size_t(m.rows()) == h.n && m.rows() == m.cols(), "spectral_error: dimension mismatch");
    struct Residual
    {
        const std::vector<std::size_t>* rows;
        const std::vector<std::size_t>* cols;
        DenseMatrix e;
    };
    std::vector<Residual> res;
    SpectralError out;
    for (const auto& b : h.low_rank) {
        DenseMatrix e = extract_block(m, b.rows, b.cols);
        if (b.rank() > 0) {
            // extended precision keeps the product's rounding below the discarded spectrum
            const ExtendedMatrix xy = b.x.cast<long double>() * b.y.cast<long double>().transpose();
            e = (e.cast<long double>() - xy).cast<double>();
        }
        out.frobenius += e.squaredNorm();
        res.push_back({&b.rows, &b.cols, std::move(e)});
    }
    for (const auto& b : h.dense) {
        DenseMatrix e = extract_block(m, b.rows, b.cols) - b.values;
        out.frobenius += e.squaredNorm();
        if (e.cwiseAbs().maxCoeff() > 0.0)
            res.push_back({&b.rows, &b.cols, std::move(e)});
    }
    out.frobenius = std::sqrt(out.frobenius);
    if (h.n == 0 || out.frobenius == 0.0)
        return out;

    auto apply = [&](const Vector& x, bool transpose) {
        Vector y = Vector::Zero(x.size());
        for (const auto& r : res) {
            const auto& in = transpose ? *r.rows : *r.cols;
            const auto& to = transpose ? *r.cols : *r.rows;
            Vector g(Eigen::Index(in.size()));
            for (std::size_t i = 0; i < in.size(); ++i)
                g(Eigen::Index(i)) = x(Eigen::Index(in[i]));
            const Vector z = transpose ? Vector(r.e.transpose() * g) : Vector(r.e * g);
            for (std::size_t i = 0; i < to.size(); ++i)
                y(Eigen::Index(to[i])) += z(Eigen::Index(i));
        }
        return y;
    };

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    Vector v(Eigen::Index(h.n));
    for (auto& x : v)
        x = gauss(rng);
    v.normalize();
    double prev = 0;
    for (std::size_t it = 0; it < max_iterations; ++it) {
        const Vector w = apply(v, false);
        const Vector z = apply(w, true);
        const double nz = z.norm();
        out.iterations = it + 1;
        out.estimate = std::max(out.estimate, w.norm());
        if (nz == 0.0)
            break;
        v = z / nz;
        if (std::abs(out.estimate - prev) <= tol * out.estimate)
            break;
        prev = out.estimate;
    }
    return out;
}

//
// rank sweep
//

struct SweepRow
{
    std::size_t r = 0;
    double computable_bound = 0;
    double spectral_error = 0;
    double frobenius_error = 0;
    std::size_t memory_bytes = 0;
    std::size_t depth = 0;
    std::size_t n_adm = 0;
    std::size_t n_small = 0;
};

inline SweepRow sweep_row(const DenseMatrix& m, const HMatrix& h)
{
    const auto e = spectral_error(m, h);
    return {h.rank_bound, computable_bound(h), e.estimate, e.frobenius, memory_bytes(h), h.block_tree_depth,
            h.low_rank.size(), h.dense.size()};
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows)
{
    os << "r,computable_bound,spectral_error,memory_bytes,depth,n_adm,n_small\n";
    for (const auto& r : rows)
        os << r.r << "," << detail::sci17(r.computable_bound) << "," << detail::sci17(r.spectral_error) << ","
           << r.memory_bytes << "," << r.depth << "," << r.n_adm << "," << r.n_small << "\n";
}

/// Least-squares line y = a + b x with its coefficient of determination.
struct LinearFit
{
    double intercept = 0;
    double slope = 0;
    double r_squared = 0;
};

inline LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y)
{
    detail::require(x.size() == y.size() && x.size() >= 2, "linear_fit: need at least two points");
    const double n = double(x.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LinearFit f;
    f.slope = sxx > 0 ? sxy / sxx : 0.0;
    f.intercept = my - f.slope * mx;
    f.r_squared = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return f;
}

} // namespace hmfem
