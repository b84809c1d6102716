#pragma once

// Compressed sparse row storage in working precision plus Matrix Market I/O.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "chopsolve/errors.hpp"

namespace chopsolve {

struct Triplet {
    std::size_t row;
    std::size_t col;
    double value;
};

/// Immutable CSR matrix. Column indices are sorted and unique within a row.
class SparseMatrix {
public:
    SparseMatrix() : row_offsets_(1, 0) {}

    /// Takes ownership of raw CSR arrays. Throws DimensionError if the arrays
    /// violate the CSR invariants.
    SparseMatrix(std::size_t n_rows, std::size_t n_cols, std::vector<std::size_t> row_offsets,
                 std::vector<std::size_t> col_indices, std::vector<double> values)
        : n_rows_(n_rows),
          n_cols_(n_cols),
          row_offsets_(std::move(row_offsets)),
          col_indices_(std::move(col_indices)),
          values_(std::move(values)) {
        check();
    }

    /// Builds from unordered triplets; duplicate (row, col) entries are summed.
    static SparseMatrix from_triplets(std::size_t n_rows, std::size_t n_cols, std::vector<Triplet> t) {
        for (const auto& e : t)
            if (e.row >= n_rows || e.col >= n_cols)
                throw DimensionError("triplet (" + std::to_string(e.row) + ", " + std::to_string(e.col) +
                                     ") outside " + std::to_string(n_rows) + "x" + std::to_string(n_cols));
        std::sort(t.begin(), t.end(), [](const Triplet& a, const Triplet& b) {
            return std::tie(a.row, a.col) < std::tie(b.row, b.col);
        });
        std::vector<std::size_t> offsets(n_rows + 1, 0);
        std::vector<std::size_t> cols;
        std::vector<double> vals;
        cols.reserve(t.size());
        vals.reserve(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (i > 0 && t[i].row == t[i - 1].row && t[i].col == t[i - 1].col) {
                vals.back() += t[i].value;
                continue;
            }
            cols.push_back(t[i].col);
            vals.push_back(t[i].value);
            ++offsets[t[i].row + 1];
        }
        std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
        return {n_rows, n_cols, std::move(offsets), std::move(cols), std::move(vals)};
    }

    static SparseMatrix identity(std::size_t n) {
        std::vector<double> ones(n, 1.0);
        return diagonal(ones);
    }

    static SparseMatrix diagonal(std::span<const double> d) {
        const std::size_t n = d.size();
        std::vector<std::size_t> offsets(n + 1), cols(n);
        std::iota(offsets.begin(), offsets.end(), std::size_t{0});
        std::iota(cols.begin(), cols.end(), std::size_t{0});
        return {n, n, std::move(offsets), std::move(cols), std::vector<double>(d.begin(), d.end())};
    }

    /// Dense row-major input; exact zeros are dropped.
    static SparseMatrix from_dense(std::size_t n_rows, std::size_t n_cols, std::span<const double> a) {
        if (a.size() != n_rows * n_cols) throw DimensionError("from_dense: size mismatch");
        std::vector<Triplet> t;
        for (std::size_t i = 0; i < n_rows; ++i)
            for (std::size_t j = 0; j < n_cols; ++j)
                if (a[i * n_cols + j] != 0.0) t.push_back({i, j, a[i * n_cols + j]});
        return from_triplets(n_rows, n_cols, std::move(t));
    }

    std::size_t rows() const noexcept { return n_rows_; }
    std::size_t cols() const noexcept { return n_cols_; }
    std::size_t nnz() const noexcept { return values_.size(); }

    std::span<const std::size_t> row_offsets() const noexcept { return row_offsets_; }
    std::span<const std::size_t> col_indices() const noexcept { return col_indices_; }
    std::span<const double> values() const noexcept { return values_; }

    std::size_t row_nnz(std::size_t i) const { return row_offsets_[i + 1] - row_offsets_[i]; }

    SparseMatrix transposed() const {
        std::vector<std::size_t> offsets(n_cols_ + 1, 0);
        for (auto c : col_indices_) ++offsets[c + 1];
        std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
        std::vector<std::size_t> cols(nnz());
        std::vector<double> vals(nnz());
        std::vector<std::size_t> next(offsets.begin(), offsets.end() - 1);
        for (std::size_t i = 0; i < n_rows_; ++i)
            for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
                const std::size_t dst = next[col_indices_[k]]++;
                cols[dst] = i;
                vals[dst] = values_[k];
            }
        return {n_cols_, n_rows_, std::move(offsets), std::move(cols), std::move(vals)};
    }

    SparseMatrix scaled(double s) const {
        std::vector<double> vals(values_);
        for (auto& v : vals) v *= s;
        return {n_rows_, n_cols_, row_offsets_, col_indices_, std::move(vals)};
    }

    /// y = A x in working precision, sequential accumulation per row.
    std::vector<double> multiply(std::span<const double> x) const {
        if (x.size() != n_cols_)
            throw DimensionError("multiply: expected length " + std::to_string(n_cols_) + ", got " +
                                 std::to_string(x.size()));
        std::vector<double> y(n_rows_, 0.0);
        for (std::size_t i = 0; i < n_rows_; ++i) {
            double s = 0.0;
            for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) s += values_[k] * x[col_indices_[k]];
            y[i] = s;
        }
        return y;
    }

    double frobenius_norm() const {
        double s = 0.0;
        for (double v : values_) s += v * v;
        return std::sqrt(s);
    }

    std::vector<double> to_dense() const {
        std::vector<double> a(n_rows_ * n_cols_, 0.0);
        for (std::size_t i = 0; i < n_rows_; ++i)
            for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k)
                a[i * n_cols_ + col_indices_[k]] = values_[k];
        return a;
    }

    friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

private:
    void check() const {
        if (row_offsets_.size() != n_rows_ + 1) throw DimensionError("row_offsets must have n_rows + 1 entries");
        if (row_offsets_.front() != 0 || row_offsets_.back() != col_indices_.size())
            throw DimensionError("row_offsets must start at 0 and end at nnz");
        if (col_indices_.size() != values_.size()) throw DimensionError("col_indices/values length mismatch");
        for (std::size_t i = 0; i < n_rows_; ++i) {
            if (row_offsets_[i + 1] < row_offsets_[i]) throw DimensionError("row_offsets must be nondecreasing");
            for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
                if (col_indices_[k] >= n_cols_) throw DimensionError("column index out of range");
                if (k > row_offsets_[i] && col_indices_[k] <= col_indices_[k - 1])
                    throw DimensionError("column indices must be strictly increasing within a row");
            }
        }
    }

    std::size_t n_rows_ = 0;
    std::size_t n_cols_ = 0;
    std::vector<std::size_t> row_offsets_;
    std::vector<std::size_t> col_indices_;
    std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// Matrix Market coordinate format (real general, 1-based, row-major sorted)

inline void write_matrix_market(std::ostream& os, const SparseMatrix& a) {
    os << "%%MatrixMarket matrix coordinate real general\n";
    os << a.rows() << ' ' << a.cols() << ' ' << a.nnz() << '\n';
    char buf[64];
    const auto off = a.row_offsets();
    const auto col = a.col_indices();
    const auto val = a.values();
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = off[i]; k < off[i + 1]; ++k) {
            std::snprintf(buf, sizeof buf, "%.17g", val[k]);
            os << (i + 1) << ' ' << (col[k] + 1) << ' ' << buf << '\n';
        }
}

inline SparseMatrix read_matrix_market(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("%%MatrixMarket", 0) != 0)
        throw IoError("matrix market: missing banner");
    std::istringstream banner(line);
    std::string tag, object, fmt, field, symmetry;
    banner >> tag >> object >> fmt >> field >> symmetry;
    if (object != "matrix" || fmt != "coordinate" || field != "real" || symmetry != "general")
        throw IoError("matrix market: only 'matrix coordinate real general' is supported");
    while (std::getline(is, line))
        if (!line.empty() && line[0] != '%') break;
    std::size_t m = 0, n = 0, nnz = 0;
    if (!(std::istringstream(line) >> m >> n >> nnz)) throw IoError("matrix market: bad size line");
    std::vector<Triplet> t;
    t.reserve(nnz);
    for (std::size_t k = 0; k < nnz; ++k) {
        std::size_t i = 0, j = 0;
        double v = 0.0;
        if (!(is >> i >> j >> v)) throw IoError("matrix market: truncated entry list");
        if (i == 0 || j == 0 || i > m || j > n) throw IoError("matrix market: index out of range");
        t.push_back({i - 1, j - 1, v});
    }
    return SparseMatrix::from_triplets(m, n, std::move(t));
}

inline void save_matrix_market(const std::string& path, const SparseMatrix& a) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    write_matrix_market(os, a);
}

inline SparseMatrix load_matrix_market(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open '" + path + "'");
    return read_matrix_market(is);
}

}  // namespace chopsolve
