#include "contrastive/numerics.hpp"

#include "contrastive/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace contrastive {

namespace {

void require_same_dim(std::size_t a, std::size_t b, const char* op) {
    if (a != b) {
        throw DimensionError(std::string(op) + ": dimension mismatch (" + std::to_string(a) +
                             " vs " + std::to_string(b) + ")");
    }
}

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// FNV-1a, used only to turn substream names into 64-bit tags.
constexpr std::uint64_t hash_name(std::string_view name) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : name) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

} // namespace

Vector& Vector::operator+=(const Vector& other) {
    require_same_dim(dim(), other.dim(), "Vector::operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Vector& Vector::operator-=(const Vector& other) {
    require_same_dim(dim(), other.dim(), "Vector::operator-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

Vector& Vector::operator*=(double scale) noexcept {
    for (double& x : data_) x *= scale;
    return *this;
}

void Vector::axpy(double scale, const Vector& other) {
    require_same_dim(dim(), other.dim(), "Vector::axpy");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += scale * other.data_[i];
}

Vector operator+(Vector a, const Vector& b) { return a += b; }
Vector operator-(Vector a, const Vector& b) { return a -= b; }
Vector operator*(double scale, Vector a) { return a *= scale; }

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (data_.size() != rows_ * cols_) {
        throw DimensionError("Matrix: " + std::to_string(data_.size()) + " values for a " +
                             std::to_string(rows_) + "x" + std::to_string(cols_) + " matrix");
    }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        require_same_dim(r.size(), cols_, "Matrix: ragged initializer");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Vector Matrix::row_vector(std::size_t r) const {
    auto s = row(r);
    return Vector(std::vector<double>(s.begin(), s.end()));
}

void Matrix::set_row(std::size_t r, const Vector& v) {
    require_same_dim(v.dim(), cols_, "Matrix::set_row");
    std::copy(v.begin(), v.end(), row(r).begin());
}

double dot(const Vector& a, const Vector& b) {
    require_same_dim(a.dim(), b.dim(), "dot");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) acc += a[i] * b[i];
    return acc;
}

double norm(const Vector& a) { return std::sqrt(dot(a, a)); }

Vector l2_normalize(const Vector& a) {
    const double n = norm(a);
    if (!(n > 0.0)) throw DomainError("l2_normalize: zero-norm vector (collapsed embedding?)");
    if (!std::isfinite(n)) throw NumericalError("l2_normalize: non-finite input");
    Vector out = a;
    for (double& x : out) x /= n;
    return out;
}

double sq_euclid(const Vector& a, const Vector& b) {
    require_same_dim(a.dim(), b.dim(), "sq_euclid");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

double log_sum_exp(std::span<const double> scores) {
    if (scores.empty()) throw DomainError("log_sum_exp: empty score sequence");
    const auto top_it = std::max_element(scores.begin(), scores.end());
    const double top = *top_it;
    if (!std::isfinite(top)) throw NumericalError("log_sum_exp: non-finite score");
    // The maximum contributes exp(0) = 1; summing the rest separately and
    // using log1p keeps LSE >= max exact in floating point.
    double rest = 0.0;
    for (auto it = scores.begin(); it != scores.end(); ++it) {
        if (it == top_it) continue;
        if (!std::isfinite(*it)) throw NumericalError("log_sum_exp: non-finite score");
        rest += std::exp(*it - top);
    }
    return top + std::log1p(rest);
}

Vector matvec(const Matrix& m, const Vector& v) {
    require_same_dim(m.cols(), v.dim(), "matvec");
    Vector out(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const auto row = m.row(r);
        double acc = 0.0;
        for (std::size_t c = 0; c < m.cols(); ++c) acc += row[c] * v[c];
        out[r] = acc;
    }
    return out;
}

Vector matvec_transposed(const Matrix& m, const Vector& v) {
    require_same_dim(m.rows(), v.dim(), "matvec_transposed");
    Vector out(m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const auto row = m.row(r);
        for (std::size_t c = 0; c < m.cols(); ++c) out[c] += row[c] * v[r];
    }
    return out;
}

Matrix outer(const Vector& a, const Vector& b) {
    Matrix m(a.dim(), b.dim());
    add_outer(m, a, b);
    return m;
}

void add_outer(Matrix& m, const Vector& a, const Vector& b, double scale) {
    require_same_dim(m.rows(), a.dim(), "add_outer (rows)");
    require_same_dim(m.cols(), b.dim(), "add_outer (cols)");
    for (std::size_t r = 0; r < a.dim(); ++r) {
        auto row = m.row(r);
        const double ar = scale * a[r];
        for (std::size_t c = 0; c < b.dim(); ++c) row[c] += ar * b[c];
    }
}

bool all_finite(std::span<const double> values) noexcept {
    return std::all_of(values.begin(), values.end(), [](double x) { return std::isfinite(x); });
}

Rng::Rng(std::uint64_t seed) noexcept : key_(mix64(seed ^ kGolden)) {}

Rng Rng::from_state(std::uint64_t key, std::uint64_t counter) noexcept { return Rng(key, counter); }

std::uint64_t Rng::next_u64() noexcept {
    ++counter_;
    return mix64(key_ + kGolden * counter_);
}

double Rng::uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::uniform_index(std::uint64_t n) noexcept {
    // Reject the top partial bucket so every index is equally likely.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
}

double Rng::normal() noexcept {
    const double u1 = 1.0 - uniform(); // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Rng Rng::fork(std::string_view name) const noexcept {
    return Rng(mix64(key_ ^ mix64(hash_name(name))), 0);
}

Rng Rng::fork(std::uint64_t index) const noexcept {
    return Rng(mix64(key_ ^ mix64(index * kGolden + 0x632BE59BD9B4E019ULL)), 0);
}

Vector rng_normal(Rng& rng, std::size_t n, double mean, double std) {
    if (!(std >= 0.0)) throw DomainError("rng_normal: std must be >= 0");
    Vector out(n);
    for (double& x : out) x = mean + std * rng.normal();
    return out;
}

} // namespace contrastive
