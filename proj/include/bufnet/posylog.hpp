#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "bufnet/error.hpp"

// Monomials, posynomials and their log-log transforms. A posynomial in
// positive variables v becomes, with v = exp(w), the log-sum-exp
// F(w) = log sum_k exp(log c_k + a_k . w), which is convex in w.

namespace bufnet::posy {

using Index = Eigen::Index;

/// Ordered registry of named variable blocks. Every expression built over a
/// space carries its id, so expressions from different problems never mix.
class VariableSpace {
public:
    struct Block {
        std::string name;
        Index offset = 0;
        Index size = 0;
    };

    VariableSpace() : id_(next_id()) {}

    explicit VariableSpace(const std::vector<std::pair<std::string, Index>>& blocks)
        : id_(next_id()) {
        for (const auto& [name, size] : blocks) {
            blocks_.push_back({name, dim_, size});
            dim_ += size;
        }
    }

    static VariableSpace anonymous(Index dim) { return VariableSpace({{"v", dim}}); }

    std::uint64_t id() const { return id_; }
    Index dim() const { return dim_; }
    const std::vector<Block>& blocks() const { return blocks_; }

    std::string variable_name(Index k) const {
        for (const Block& b : blocks_) {
            if (k >= b.offset && k < b.offset + b.size) {
                return b.size == 1 ? b.name : b.name + "[" + std::to_string(k - b.offset) + "]";
            }
        }
        return "?";
    }

private:
    static std::uint64_t next_id() {
        static std::atomic<std::uint64_t> counter{1};
        return counter.fetch_add(1);
    }

    std::uint64_t id_;
    Index dim_ = 0;
    std::vector<Block> blocks_;
};

/// Identity of a variable space as seen by expressions.
struct SpaceTag {
    std::uint64_t id = 0;
    Index dim = 0;

    friend bool operator==(const SpaceTag&, const SpaceTag&) = default;
};

inline SpaceTag tag_of(const VariableSpace& vs) { return {vs.id(), vs.dim()}; }

/// c * prod_k v_k^{a_k}, c > 0. Exponents are stored sparsely, sorted by
/// variable index, without zero powers.
template <typename Scalar>
class Monomial {
public:
    using Power = std::pair<Index, Scalar>;

    explicit Monomial(Scalar coeff = Scalar(1)) : coeff_(coeff) { check_coeff(); }

    Monomial(Scalar coeff, std::vector<Power> powers) : coeff_(coeff), powers_(std::move(powers)) {
        check_coeff();
        normalize();
    }

    Monomial(Scalar coeff, std::initializer_list<Power> powers)
        : Monomial(coeff, std::vector<Power>(powers)) {}

    static Monomial variable(Index k, Scalar power = Scalar(1), Scalar coeff = Scalar(1)) {
        return Monomial(coeff, std::vector<Power>{{k, power}});
    }

    /// Dense exponent vector `a` of length dim.
    static Monomial from_dense(Scalar coeff, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& a) {
        std::vector<Power> p;
        for (Index k = 0; k < a.size(); ++k) {
            if (a(k) != Scalar(0)) {
                p.emplace_back(k, a(k));
            }
        }
        return Monomial(coeff, std::move(p));
    }

    Scalar coeff() const { return coeff_; }
    const std::vector<Power>& powers() const { return powers_; }
    bool is_constant() const { return powers_.empty(); }
    Index max_index() const { return powers_.empty() ? Index(-1) : powers_.back().first; }

    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> exponents(Index dim) const {
        Eigen::Matrix<Scalar, Eigen::Dynamic, 1> a = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(dim);
        for (const auto& [k, e] : powers_) {
            a(k) = e;
        }
        return a;
    }

    /// log c + a . w
    template <typename Derived>
    Scalar log_value(const Eigen::MatrixBase<Derived>& w) const {
        Scalar s = std::log(coeff_);
        for (const auto& [k, e] : powers_) {
            s += e * w(k);
        }
        return s;
    }

    Monomial& operator*=(const Monomial& other) {
        coeff_ *= other.coeff_;
        std::vector<Power> merged = powers_;
        merged.insert(merged.end(), other.powers_.begin(), other.powers_.end());
        powers_ = std::move(merged);
        normalize();
        return *this;
    }

    friend Monomial operator*(Monomial a, const Monomial& b) { return a *= b; }

    /// Same exponents (coefficients may differ).
    bool like(const Monomial& other) const { return powers_ == other.powers_; }

    void scale(Scalar k) {
        if (!(k > Scalar(0))) {
            throw Error(Errc::ScaleNonpositive, "monomial scale must be positive");
        }
        coeff_ *= k;
    }

private:
    void check_coeff() const {
        if (!(coeff_ > Scalar(0)) || !std::isfinite(static_cast<double>(coeff_))) {
            throw Error(Errc::NonpositiveCoefficient, "monomial coefficient must be positive and finite");
        }
    }

    void normalize() {
        std::sort(powers_.begin(), powers_.end(),
                  [](const Power& a, const Power& b) { return a.first < b.first; });
        std::vector<Power> out;
        for (const Power& p : powers_) {
            if (!out.empty() && out.back().first == p.first) {
                out.back().second += p.second;
            } else {
                out.push_back(p);
            }
        }
        out.erase(std::remove_if(out.begin(), out.end(), [](const Power& p) { return p.second == Scalar(0); }),
                  out.end());
        powers_ = std::move(out);
    }

    Scalar coeff_;
    std::vector<Power> powers_;
};

template <typename Scalar, typename Derived>
Scalar eval_monomial(const Monomial<Scalar>& m, const Eigen::MatrixBase<Derived>& v) {
    Scalar out = m.coeff();
    for (const auto& [k, e] : m.powers()) {
        if (k >= v.size()) {
            throw Error(Errc::DimensionMismatch, "monomial references variable beyond input size");
        }
        if (!(v(k) > Scalar(0))) {
            throw Error(Errc::NonpositiveInput, "variable " + std::to_string(k) + " is not positive");
        }
        out *= std::pow(v(k), e);
    }
    // Variables not referenced by m still have to be positive.
    for (Index k = 0; k < v.size(); ++k) {
        if (!(v(k) > Scalar(0))) {
            throw Error(Errc::NonpositiveInput, "variable " + std::to_string(k) + " is not positive");
        }
    }
    return out;
}

/// Sum of monomials over one variable space. An empty posynomial stands for
/// the zero function; it cannot be evaluated or log-transformed.
template <typename Scalar>
class Posynomial {
public:
    using Term = Monomial<Scalar>;

    Posynomial() = default;
    explicit Posynomial(SpaceTag space) : space_(space) {}
    Posynomial(SpaceTag space, std::vector<Term> terms) : space_(space), terms_(std::move(terms)) {
        for (const Term& t : terms_) {
            check_term(t);
        }
        merge_like_terms();
    }
    Posynomial(SpaceTag space, std::initializer_list<Term> terms)
        : Posynomial(space, std::vector<Term>(terms)) {}

    SpaceTag space() const { return space_; }
    const std::vector<Term>& terms() const { return terms_; }
    bool empty() const { return terms_.empty(); }
    std::size_t size() const { return terms_.size(); }
    bool is_monomial() const { return terms_.size() == 1; }

    void add_term(const Term& t) {
        check_term(t);
        for (Term& existing : terms_) {
            if (existing.like(t)) {
                existing = Term(existing.coeff() + t.coeff(), existing.powers());
                return;
            }
        }
        terms_.push_back(t);
    }

    Posynomial& operator+=(const Posynomial& other) {
        require_same_space(other);
        for (const Term& t : other.terms_) {
            add_term(t);
        }
        return *this;
    }

    void require_same_space(const Posynomial& other) const {
        if (!(space_ == other.space_)) {
            throw Error(Errc::SpaceMismatch, "posynomials live in different variable spaces");
        }
    }

private:
    void check_term(const Term& t) const {
        if (t.max_index() >= space_.dim) {
            throw Error(Errc::DimensionMismatch, "term references variable outside its space");
        }
    }

    void merge_like_terms() {
        std::vector<Term> merged;
        for (const Term& t : terms_) {
            bool found = false;
            for (Term& m : merged) {
                if (m.like(t)) {
                    m = Term(m.coeff() + t.coeff(), m.powers());
                    found = true;
                    break;
                }
            }
            if (!found) {
                merged.push_back(t);
            }
        }
        terms_ = std::move(merged);
    }

    SpaceTag space_;
    std::vector<Term> terms_;
};

template <typename Scalar, typename Derived>
Scalar eval_posynomial(const Posynomial<Scalar>& f, const Eigen::MatrixBase<Derived>& v) {
    if (f.empty()) {
        throw Error(Errc::EmptyPosynomial, "cannot evaluate the empty posynomial");
    }
    if (v.size() != f.space().dim) {
        throw Error(Errc::DimensionMismatch, "input size does not match variable space");
    }
    Scalar s(0);
    for (const auto& t : f.terms()) {
        s += eval_monomial(t, v);
    }
    return s;
}

template <typename Scalar>
Posynomial<Scalar> posy_add(const Posynomial<Scalar>& f, const Posynomial<Scalar>& g) {
    Posynomial<Scalar> out = f;
    out += g;
    return out;
}

template <typename Scalar>
Posynomial<Scalar> posy_scale(const Posynomial<Scalar>& f, Scalar k) {
    if (!(k > Scalar(0))) {
        throw Error(Errc::ScaleNonpositive, "posynomial scale must be positive");
    }
    std::vector<Monomial<Scalar>> terms = f.terms();
    for (auto& t : terms) {
        t.scale(k);
    }
    return Posynomial<Scalar>(f.space(), std::move(terms));
}

template <typename Scalar>
Posynomial<Scalar> posy_mul_monomial(const Posynomial<Scalar>& f, const Monomial<Scalar>& m) {
    std::vector<Monomial<Scalar>> terms;
    terms.reserve(f.size());
    for (const auto& t : f.terms()) {
        terms.push_back(t * m);
    }
    return Posynomial<Scalar>(f.space(), std::move(terms));
}

template <typename Scalar>
Posynomial<Scalar> operator+(const Posynomial<Scalar>& f, const Posynomial<Scalar>& g) {
    return posy_add(f, g);
}

template <typename Scalar>
Posynomial<Scalar> operator*(const Posynomial<Scalar>& f, const Monomial<Scalar>& m) {
    return posy_mul_monomial(f, m);
}

/// Affine function c + g . w.
template <typename Scalar>
struct AffineForm {
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    Scalar constant = Scalar(0);
    Vector slope;

    template <typename Derived>
    Scalar operator()(const Eigen::MatrixBase<Derived>& w) const {
        return constant + slope.dot(w);
    }
};

/// F(w) = log f(exp w). Evaluation uses a max shift so large exponents do
/// not overflow.
template <typename Scalar>
class LogPosynomial {
public:
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Power = typename Monomial<Scalar>::Power;

    explicit LogPosynomial(const Posynomial<Scalar>& source) : dim_(source.space().dim) {
        if (source.empty()) {
            throw Error(Errc::EmptyPosynomial, "log transform of the empty posynomial");
        }
        for (const auto& t : source.terms()) {
            log_coeff_.push_back(std::log(t.coeff()));
            powers_.push_back(t.powers());
        }
    }

    Index dim() const { return dim_; }
    std::size_t num_terms() const { return log_coeff_.size(); }
    bool is_affine() const { return log_coeff_.size() == 1; }
    Scalar log_coeff(std::size_t k) const { return log_coeff_[k]; }
    const std::vector<Power>& powers(std::size_t k) const { return powers_[k]; }

    template <typename Derived>
    Scalar value(const Eigen::MatrixBase<Derived>& w) const {
        std::vector<Scalar> z = exponents(w);
        const Scalar zmax = *std::max_element(z.begin(), z.end());
        Scalar s(0);
        for (Scalar zk : z) {
            s += std::exp(zk - zmax);
        }
        return zmax + std::log(s);
    }

    /// Softmax weights of the terms at w; they sum to one.
    template <typename Derived>
    std::vector<Scalar> weights(const Eigen::MatrixBase<Derived>& w) const {
        std::vector<Scalar> z = exponents(w);
        const Scalar zmax = *std::max_element(z.begin(), z.end());
        Scalar s(0);
        for (Scalar& zk : z) {
            zk = std::exp(zk - zmax);
            s += zk;
        }
        for (Scalar& zk : z) {
            zk /= s;
        }
        return z;
    }

    template <typename Derived>
    Vector gradient(const Eigen::MatrixBase<Derived>& w) const {
        const std::vector<Scalar> p = weights(w);
        Vector g = Vector::Zero(dim_);
        for (std::size_t k = 0; k < p.size(); ++k) {
            for (const auto& [i, e] : powers_[k]) {
                g(i) += p[k] * e;
            }
        }
        return g;
    }

    /// sum_k p_k a_k a_k^T - g g^T
    template <typename Derived>
    Matrix hessian(const Eigen::MatrixBase<Derived>& w) const {
        const std::vector<Scalar> p = weights(w);
        Vector g = Vector::Zero(dim_);
        Matrix h = Matrix::Zero(dim_, dim_);
        for (std::size_t k = 0; k < p.size(); ++k) {
            for (const auto& [i, ei] : powers_[k]) {
                g(i) += p[k] * ei;
                for (const auto& [j, ej] : powers_[k]) {
                    h(i, j) += p[k] * ei * ej;
                }
            }
        }
        h.noalias() -= g * g.transpose();
        return h;
    }

private:
    template <typename Derived>
    std::vector<Scalar> exponents(const Eigen::MatrixBase<Derived>& w) const {
        if (w.size() != dim_) {
            throw Error(Errc::DimensionMismatch, "log-variable size does not match variable space");
        }
        std::vector<Scalar> z(log_coeff_.size());
        for (std::size_t k = 0; k < z.size(); ++k) {
            Scalar s = log_coeff_[k];
            for (const auto& [i, e] : powers_[k]) {
                s += e * w(i);
            }
            z[k] = s;
        }
        return z;
    }

    Index dim_ = 0;
    std::vector<Scalar> log_coeff_;
    std::vector<std::vector<Power>> powers_;
};

template <typename Scalar>
LogPosynomial<Scalar> log_transform(const Posynomial<Scalar>& f) {
    return LogPosynomial<Scalar>(f);
}

/// Tangent of the convex F_Q at w0. It under-estimates F_Q everywhere, so
/// F_P - tangent over-estimates the DC function F_P - F_Q.
template <typename Scalar, typename Derived>
AffineForm<Scalar> linearize_concave(const LogPosynomial<Scalar>& q, const Eigen::MatrixBase<Derived>& w0) {
    AffineForm<Scalar> t;
    t.slope = q.gradient(w0);
    t.constant = q.value(w0) - t.slope.dot(w0);
    return t;
}

template <typename Scalar, typename Derived>
AffineForm<Scalar> linearize_concave(const Posynomial<Scalar>& q, const Eigen::MatrixBase<Derived>& w0) {
    return linearize_concave(LogPosynomial<Scalar>(q), w0);
}

/// Constraint log P(exp w) - log Q(exp w) <= 0.
template <typename Scalar>
struct DCConstraint {
    Posynomial<Scalar> P;
    Posynomial<Scalar> Q;
    std::string label;

    DCConstraint(Posynomial<Scalar> p, Posynomial<Scalar> q, std::string name = {})
        : P(std::move(p)), Q(std::move(q)), label(std::move(name)) {
        P.require_same_space(Q);
        if (P.empty() || Q.empty()) {
            throw Error(Errc::EmptyPosynomial, "DC constraint '" + label + "' has an empty side");
        }
    }

    template <typename Derived>
    Scalar value(const Eigen::MatrixBase<Derived>& w) const {
        return LogPosynomial<Scalar>(P).value(w) - LogPosynomial<Scalar>(Q).value(w);
    }
};

using Monomiald = Monomial<double>;
using Posynomiald = Posynomial<double>;
using LogPosynomiald = LogPosynomial<double>;
using AffineFormd = AffineForm<double>;
using DCConstraintd = DCConstraint<double>;

} // namespace bufnet::posy
