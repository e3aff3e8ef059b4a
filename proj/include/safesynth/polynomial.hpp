#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

namespace safesynth {

/// Coefficients below this magnitude are dropped during canonicalization.
inline constexpr double kCoeffDropTol = 1e-12;

/// One named group of scalar indeterminates, e.g. the error block "e" of
/// dimension 4 whose scalars serialize as e1..e4.
struct Block {
    std::string name;    // symbolic label: e, xhat, uhat, delta, theta, x
    std::string prefix;  // serialization prefix: e, xh, uh, d, th, x
    int dim = 0;

    friend bool operator==(const Block&, const Block&) = default;
};

/// Makes a block with the conventional serialization prefix for the
/// standard names (xhat -> xh, uhat -> uh, theta -> th, delta -> d).
Block makeBlock(const std::string& name, int dim);

/// Ordered list of blocks defining the variable space of a polynomial.
/// Scalar variables are flat-indexed in declaration order.
class Universe {
  public:
    Universe() = default;
    explicit Universe(std::vector<Block> blocks);

    int varCount() const { return total_; }
    int blockCount() const { return static_cast<int>(blocks_.size()); }
    const std::vector<Block>& blocks() const { return blocks_; }

    bool hasBlock(const std::string& name) const;
    const Block& block(const std::string& name) const;
    int blockIndex(const std::string& name) const;  // -1 if absent

    /// Flat index of scalar `idx` (0-based) within block `name`.
    int flatIndex(const std::string& name, int idx) const;
    /// First flat index of a block.
    int blockOffset(int blockIdx) const;
    /// Inverse of flatIndex: (block index, index within block).
    std::pair<int, int> locate(int flat) const;

    /// Serialized name of a scalar variable, e.g. "xh2".
    std::string varName(int flat) const;
    /// Parse a serialized variable name; returns flat index or nullopt.
    std::optional<int> parseVarName(const std::string& token) const;

    /// Union of two universes. Shared blocks must agree in dimension;
    /// blocks of `b` not present in `a` are appended in order.
    static Universe merged(const Universe& a, const Universe& b);
    /// True if every block of `sub` appears identically in `sup`.
    static bool subsumes(const Universe& sup, const Universe& sub);

    /// Universe with one block removed.
    Universe without(const std::string& name) const;

    friend bool operator==(const Universe&, const Universe&) = default;

  private:
    std::vector<Block> blocks_;
    std::vector<int> offsets_;
    int total_ = 0;
};

/// Power product of universe variables; zero exponents are not stored.
class Monomial {
  public:
    Monomial() = default;

    static Monomial one() { return Monomial(); }
    static Monomial variable(int flatVar, int exp = 1);

    int degree() const;
    int exponent(int flatVar) const;
    bool isOne() const { return factors_.empty(); }
    const std::vector<std::pair<int, int>>& factors() const { return factors_; }

    Monomial times(const Monomial& other) const;
    /// Remaps flat variable indices (used when embedding into a merged
    /// universe).
    Monomial remapped(const std::vector<int>& map) const;

    double evalOn(const Eigen::VectorXd& point) const;

    friend bool operator==(const Monomial&, const Monomial&) = default;

  private:
    // sorted by flat variable index, exponents > 0
    std::vector<std::pair<int, int>> factors_;
};

/// Graded lexicographic order: by total degree, then lexicographic on the
/// exponent vector in flat variable order. Deterministic serialization and
/// Gram bases depend on this.
struct GrlexLess {
    bool operator()(const Monomial& a, const Monomial& b) const;
};

/// Evaluation point: one vector per block, keyed by block name.
using Point = std::map<std::string, Eigen::VectorXd>;

/// Sparse multivariate polynomial with real coefficients over a declared
/// universe of indeterminate blocks.
class Polynomial {
  public:
    Polynomial() = default;
    explicit Polynomial(Universe u) : universe_(std::move(u)) {}

    static Polynomial zero(const Universe& u) { return Polynomial(u); }
    static Polynomial constant(const Universe& u, double c);
    static Polynomial variable(const Universe& u, const std::string& block, int idx);
    static Polynomial fromTerms(const Universe& u,
                                std::map<Monomial, double, GrlexLess> terms);

    const Universe& universe() const { return universe_; }
    const std::map<Monomial, double, GrlexLess>& terms() const { return terms_; }

    bool isZero() const { return terms_.empty(); }
    int degree() const;
    /// Highest total exponent of the given block's variables in any term.
    int degreeInBlock(const std::string& name) const;
    double coefficient(const Monomial& m) const;
    double constantTerm() const { return coefficient(Monomial::one()); }

    /// Re-expresses the polynomial over a superset universe.
    Polynomial inUniverse(const Universe& u) const;

    Polynomial operator-() const;
    Polynomial& operator+=(const Polynomial& rhs);
    Polynomial& operator-=(const Polynomial& rhs);
    Polynomial& operator*=(const Polynomial& rhs);
    Polynomial& operator*=(double s);

    friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
    friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
    friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
    friend Polynomial operator*(Polynomial a, double s) { return a *= s; }
    friend Polynomial operator*(double s, Polynomial a) { return a *= s; }
    friend Polynomial operator+(Polynomial a, double c);
    friend Polynomial operator-(Polynomial a, double c) { return std::move(a) + (-c); }

    /// Formal partial derivative with respect to one scalar variable.
    Polynomial partial(const std::string& block, int idx) const;

    /// Composition: replaces every variable of `block` by the corresponding
    /// entry of `expr`. The block disappears from the universe; the
    /// universes of the replacement polynomials are merged in.
    Polynomial substitute(const std::string& block,
                          const std::vector<Polynomial>& expr) const;

    /// Numeric evaluation. Throws std::invalid_argument when a block of the
    /// universe is missing from the point or has the wrong dimension.
    double eval(const Point& point) const;
    double evalFlat(const Eigen::VectorXd& flatPoint) const;

    /// Gradient with respect to one block, as polynomials.
    std::vector<Polynomial> gradient(const std::string& block) const;

    nlohmann::json toJson() const;
    /// Parses the `{coeff, vars}` record list against the given universe.
    static Polynomial fromJson(const Universe& u, const nlohmann::json& j);

    std::string str() const;

  private:
    void dropSmallTerms();

    Universe universe_;
    std::map<Monomial, double, GrlexLess> terms_;
};

/// Column vector of polynomials sharing one universe.
struct PolynomialVector {
    std::vector<Polynomial> entries;

    int size() const { return static_cast<int>(entries.size()); }
    const Polynomial& operator[](int i) const { return entries[i]; }
    Polynomial& operator[](int i) { return entries[i]; }

    Eigen::VectorXd eval(const Point& point) const;
};

/// Rectangular array of polynomials sharing one universe.
struct PolynomialMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<Polynomial> entries;  // row-major

    const Polynomial& operator()(int r, int c) const { return entries[r * cols + c]; }
    Polynomial& operator()(int r, int c) { return entries[r * cols + c]; }

    Eigen::MatrixXd eval(const Point& point) const;
};

/// Flattens a Point into the universe's flat variable order.
Eigen::VectorXd flatten(const Universe& u, const Point& point);

}  // namespace safesynth
