#include "safesynth/polynomial.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace safesynth {

Block makeBlock(const std::string& name, int dim) {
    if (dim < 1) throw std::invalid_argument("block dimension must be >= 1: " + name);
    std::string prefix = name;
    if (name == "xhat") prefix = "xh";
    else if (name == "uhat") prefix = "uh";
    else if (name == "theta") prefix = "th";
    else if (name == "delta") prefix = "d";
    return Block{name, prefix, dim};
}

Universe::Universe(std::vector<Block> blocks) : blocks_(std::move(blocks)) {
    offsets_.reserve(blocks_.size());
    for (const auto& b : blocks_) {
        for (const auto& other : blocks_)
            if (&b != &other && b.name == other.name)
                throw std::invalid_argument("duplicate block name: " + b.name);
        offsets_.push_back(total_);
        total_ += b.dim;
    }
}

bool Universe::hasBlock(const std::string& name) const { return blockIndex(name) >= 0; }

int Universe::blockIndex(const std::string& name) const {
    for (int i = 0; i < blockCount(); ++i)
        if (blocks_[i].name == name) return i;
    return -1;
}

const Block& Universe::block(const std::string& name) const {
    int i = blockIndex(name);
    if (i < 0) throw std::invalid_argument("no such block: " + name);
    return blocks_[i];
}

int Universe::flatIndex(const std::string& name, int idx) const {
    int b = blockIndex(name);
    if (b < 0) throw std::invalid_argument("no such block: " + name);
    if (idx < 0 || idx >= blocks_[b].dim)
        throw std::out_of_range("variable index out of range in block " + name);
    return offsets_[b] + idx;
}

int Universe::blockOffset(int blockIdx) const { return offsets_[blockIdx]; }

std::pair<int, int> Universe::locate(int flat) const {
    for (int i = blockCount() - 1; i >= 0; --i)
        if (flat >= offsets_[i]) return {i, flat - offsets_[i]};
    throw std::out_of_range("flat index out of range");
}

std::string Universe::varName(int flat) const {
    auto [b, i] = locate(flat);
    return blocks_[b].prefix + std::to_string(i + 1);
}

std::optional<int> Universe::parseVarName(const std::string& token) const {
    // longest-prefix match so that "xh1" resolves against "x" and "xhat"
    int best = -1;
    size_t bestLen = 0;
    for (int b = 0; b < blockCount(); ++b) {
        const std::string& p = blocks_[b].prefix;
        if (token.size() > p.size() && token.compare(0, p.size(), p) == 0 &&
            p.size() > bestLen) {
            // remainder must be all digits
            bool digits = true;
            for (size_t k = p.size(); k < token.size(); ++k)
                if (!std::isdigit(static_cast<unsigned char>(token[k]))) digits = false;
            if (digits) {
                best = b;
                bestLen = p.size();
            }
        }
    }
    if (best < 0) return std::nullopt;
    int idx = std::stoi(token.substr(bestLen)) - 1;
    if (idx < 0 || idx >= blocks_[best].dim) return std::nullopt;
    return offsets_[best] + idx;
}

Universe Universe::merged(const Universe& a, const Universe& b) {
    std::vector<Block> blocks = a.blocks_;
    for (const auto& blk : b.blocks_) {
        int i = a.blockIndex(blk.name);
        if (i >= 0) {
            if (a.blocks_[i].dim != blk.dim)
                throw std::invalid_argument("block dimension mismatch for " + blk.name);
        } else {
            blocks.push_back(blk);
        }
    }
    return Universe(std::move(blocks));
}

bool Universe::subsumes(const Universe& sup, const Universe& sub) {
    for (const auto& blk : sub.blocks()) {
        int i = sup.blockIndex(blk.name);
        if (i < 0 || sup.blocks()[i].dim != blk.dim) return false;
    }
    return true;
}

Universe Universe::without(const std::string& name) const {
    std::vector<Block> blocks;
    for (const auto& b : blocks_)
        if (b.name != name) blocks.push_back(b);
    return Universe(std::move(blocks));
}

Monomial Monomial::variable(int flatVar, int exp) {
    Monomial m;
    if (exp > 0) m.factors_.push_back({flatVar, exp});
    return m;
}

int Monomial::degree() const {
    int d = 0;
    for (const auto& [v, e] : factors_) d += e;
    return d;
}

int Monomial::exponent(int flatVar) const {
    for (const auto& [v, e] : factors_)
        if (v == flatVar) return e;
    return 0;
}

Monomial Monomial::times(const Monomial& other) const {
    Monomial out;
    out.factors_.reserve(factors_.size() + other.factors_.size());
    size_t i = 0, j = 0;
    while (i < factors_.size() || j < other.factors_.size()) {
        if (j == other.factors_.size() ||
            (i < factors_.size() && factors_[i].first < other.factors_[j].first)) {
            out.factors_.push_back(factors_[i++]);
        } else if (i == factors_.size() || other.factors_[j].first < factors_[i].first) {
            out.factors_.push_back(other.factors_[j++]);
        } else {
            out.factors_.push_back({factors_[i].first,
                                    factors_[i].second + other.factors_[j].second});
            ++i, ++j;
        }
    }
    return out;
}

Monomial Monomial::remapped(const std::vector<int>& map) const {
    Monomial out;
    out.factors_.reserve(factors_.size());
    for (const auto& [v, e] : factors_) out.factors_.push_back({map[v], e});
    std::sort(out.factors_.begin(), out.factors_.end());
    return out;
}

double Monomial::evalOn(const Eigen::VectorXd& point) const {
    double r = 1.0;
    for (const auto& [v, e] : factors_) {
        double base = point[v];
        for (int k = 0; k < e; ++k) r *= base;
    }
    return r;
}

bool GrlexLess::operator()(const Monomial& a, const Monomial& b) const {
    int da = a.degree(), db = b.degree();
    if (da != db) return da < db;
    // lexicographic on exponent sequences in flat variable order:
    // earlier variable with higher exponent ranks later (x1^2 > x1 x2)
    const auto& fa = a.factors();
    const auto& fb = b.factors();
    size_t i = 0, j = 0;
    while (i < fa.size() && j < fb.size()) {
        if (fa[i].first != fb[j].first) return fa[i].first > fb[j].first;
        if (fa[i].second != fb[j].second) return fa[i].second < fb[j].second;
        ++i, ++j;
    }
    return fa.size() < fb.size() && i == fa.size() && j < fb.size() ? true : false;
}

Polynomial Polynomial::constant(const Universe& u, double c) {
    Polynomial p(u);
    if (std::abs(c) >= kCoeffDropTol) p.terms_[Monomial::one()] = c;
    return p;
}

Polynomial Polynomial::variable(const Universe& u, const std::string& block, int idx) {
    Polynomial p(u);
    p.terms_[Monomial::variable(u.flatIndex(block, idx))] = 1.0;
    return p;
}

Polynomial Polynomial::fromTerms(const Universe& u,
                                 std::map<Monomial, double, GrlexLess> terms) {
    Polynomial p(u);
    p.terms_ = std::move(terms);
    p.dropSmallTerms();
    return p;
}

int Polynomial::degree() const {
    int d = 0;
    for (const auto& [m, c] : terms_) d = std::max(d, m.degree());
    return d;
}

int Polynomial::degreeInBlock(const std::string& name) const {
    int b = universe_.blockIndex(name);
    if (b < 0) return 0;
    int lo = universe_.blockOffset(b);
    int hi = lo + universe_.blocks()[b].dim;
    int d = 0;
    for (const auto& [m, c] : terms_) {
        int dm = 0;
        for (const auto& [v, e] : m.factors())
            if (v >= lo && v < hi) dm += e;
        d = std::max(d, dm);
    }
    return d;
}

double Polynomial::coefficient(const Monomial& m) const {
    auto it = terms_.find(m);
    return it == terms_.end() ? 0.0 : it->second;
}

Polynomial Polynomial::inUniverse(const Universe& u) const {
    if (u == universe_) return *this;
    if (!Universe::subsumes(u, universe_))
        throw std::invalid_argument("target universe does not subsume source");
    std::vector<int> map(universe_.varCount());
    for (const auto& blk : universe_.blocks())
        for (int i = 0; i < blk.dim; ++i)
            map[universe_.flatIndex(blk.name, i)] = u.flatIndex(blk.name, i);
    Polynomial out(u);
    for (const auto& [m, c] : terms_) out.terms_[m.remapped(map)] = c;
    return out;
}

Polynomial Polynomial::operator-() const {
    Polynomial out(universe_);
    for (const auto& [m, c] : terms_) out.terms_[m] = -c;
    return out;
}

Polynomial& Polynomial::operator+=(const Polynomial& rhs) {
    if (!(rhs.universe_ == universe_)) {
        Universe u = Universe::merged(universe_, rhs.universe_);
        *this = inUniverse(u);
        return *this += rhs.inUniverse(u);
    }
    for (const auto& [m, c] : rhs.terms_) {
        auto [it, inserted] = terms_.try_emplace(m, c);
        if (!inserted) it->second += c;
    }
    dropSmallTerms();
    return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& rhs) { return *this += -rhs; }

Polynomial& Polynomial::operator*=(const Polynomial& rhs) {
    *this = *this * rhs;
    return *this;
}

Polynomial& Polynomial::operator*=(double s) {
    for (auto& [m, c] : terms_) c *= s;
    dropSmallTerms();
    return *this;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    if (!(a.universe_ == b.universe_)) {
        Universe u = Universe::merged(a.universe_, b.universe_);
        return a.inUniverse(u) * b.inUniverse(u);
    }
    Polynomial out(a.universe_);
    for (const auto& [ma, ca] : a.terms_) {
        for (const auto& [mb, cb] : b.terms_) {
            Monomial m = ma.times(mb);
            auto [it, inserted] = out.terms_.try_emplace(m, ca * cb);
            if (!inserted) it->second += ca * cb;
        }
    }
    out.dropSmallTerms();
    return out;
}

Polynomial operator+(Polynomial a, double c) {
    Polynomial k = Polynomial::constant(a.universe(), c);
    return std::move(a) + k;
}

Polynomial Polynomial::partial(const std::string& block, int idx) const {
    int var = universe_.flatIndex(block, idx);
    Polynomial out(universe_);
    for (const auto& [m, c] : terms_) {
        int e = m.exponent(var);
        if (e == 0) continue;
        Monomial dm;
        for (const auto& [v, ev] : m.factors()) {
            int ne = (v == var) ? ev - 1 : ev;
            if (ne > 0) dm = dm.times(Monomial::variable(v, ne));
        }
        auto [it, inserted] = out.terms_.try_emplace(dm, c * e);
        if (!inserted) it->second += c * e;
    }
    out.dropSmallTerms();
    return out;
}

Polynomial Polynomial::substitute(const std::string& block,
                                  const std::vector<Polynomial>& expr) const {
    const Block& blk = universe_.block(block);
    if (static_cast<int>(expr.size()) != blk.dim)
        throw std::invalid_argument("substitute: expression length != block dim");
    Universe rest = universe_.without(block);
    Universe target = rest;
    for (const auto& p : expr) target = Universe::merged(target, p.universe());

    int lo = universe_.blockOffset(universe_.blockIndex(block));
    int hi = lo + blk.dim;

    // cached powers of the replacement polynomials
    std::vector<std::vector<Polynomial>> powers(blk.dim);
    for (int i = 0; i < blk.dim; ++i)
        powers[i].push_back(Polynomial::constant(target, 1.0));

    auto power = [&](int i, int e) -> const Polynomial& {
        while (static_cast<int>(powers[i].size()) <= e)
            powers[i].push_back(powers[i].back() * expr[i].inUniverse(target));
        return powers[i][e];
    };

    std::vector<int> restMap(universe_.varCount(), -1);
    for (const auto& b : rest.blocks())
        for (int i = 0; i < b.dim; ++i)
            restMap[universe_.flatIndex(b.name, i)] = target.flatIndex(b.name, i);

    Polynomial out(target);
    for (const auto& [m, c] : terms_) {
        Monomial keep;
        Polynomial factor = Polynomial::constant(target, c);
        for (const auto& [v, e] : m.factors()) {
            if (v >= lo && v < hi) {
                factor = factor * power(v - lo, e);
            } else {
                keep = keep.times(Monomial::variable(restMap[v], e));
            }
        }
        if (!keep.isOne())
            factor = factor * Polynomial::fromTerms(target, {{keep, 1.0}});
        out += factor;
    }
    return out;
}

double Polynomial::eval(const Point& point) const {
    return evalFlat(flatten(universe_, point));
}

double Polynomial::evalFlat(const Eigen::VectorXd& flatPoint) const {
    if (flatPoint.size() != universe_.varCount())
        throw std::invalid_argument("evalFlat: point dimension mismatch");
    double acc = 0.0;
    for (const auto& [m, c] : terms_) acc += c * m.evalOn(flatPoint);
    return acc;
}

std::vector<Polynomial> Polynomial::gradient(const std::string& block) const {
    const Block& blk = universe_.block(block);
    std::vector<Polynomial> g;
    g.reserve(blk.dim);
    for (int i = 0; i < blk.dim; ++i) g.push_back(partial(block, i));
    return g;
}

void Polynomial::dropSmallTerms() {
    for (auto it = terms_.begin(); it != terms_.end();) {
        if (std::abs(it->second) < kCoeffDropTol) it = terms_.erase(it);
        else ++it;
    }
}

nlohmann::json Polynomial::toJson() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [m, c] : terms_) {
        nlohmann::json vars = nlohmann::json::object();
        for (const auto& [v, e] : m.factors()) vars[universe_.varName(v)] = e;
        arr.push_back({{"coeff", c}, {"vars", vars}});
    }
    return arr;
}

Polynomial Polynomial::fromJson(const Universe& u, const nlohmann::json& j) {
    Polynomial p(u);
    for (const auto& rec : j) {
        double c = rec.at("coeff").get<double>();
        Monomial m;
        if (rec.contains("vars")) {
            for (const auto& [name, expJson] : rec.at("vars").items()) {
                auto flat = u.parseVarName(name);
                if (!flat)
                    throw std::invalid_argument("unknown variable in polynomial: " + name);
                m = m.times(Monomial::variable(*flat, expJson.get<int>()));
            }
        }
        auto [it, inserted] = p.terms_.try_emplace(m, c);
        if (!inserted) it->second += c;
    }
    p.dropSmallTerms();
    return p;
}

std::string Polynomial::str() const {
    if (terms_.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (auto it = terms_.rbegin(); it != terms_.rend(); ++it) {
        const auto& [m, c] = *it;
        if (!first) os << (c >= 0 ? " + " : " - ");
        else if (c < 0) os << "-";
        first = false;
        double a = std::abs(c);
        bool wroteCoeff = false;
        if (m.isOne() || std::abs(a - 1.0) > 1e-14) {
            os << a;
            wroteCoeff = true;
        }
        for (const auto& [v, e] : m.factors()) {
            if (wroteCoeff || v != m.factors().front().first) os << "*";
            os << universe_.varName(v);
            if (e > 1) os << "^" << e;
            wroteCoeff = true;
        }
    }
    return os.str();
}

Eigen::VectorXd PolynomialVector::eval(const Point& point) const {
    Eigen::VectorXd out(size());
    for (int i = 0; i < size(); ++i) out[i] = entries[i].eval(point);
    return out;
}

Eigen::MatrixXd PolynomialMatrix::eval(const Point& point) const {
    Eigen::MatrixXd out(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) out(r, c) = (*this)(r, c).eval(point);
    return out;
}

Eigen::VectorXd flatten(const Universe& u, const Point& point) {
    Eigen::VectorXd flat(u.varCount());
    for (const auto& blk : u.blocks()) {
        auto it = point.find(blk.name);
        if (it == point.end())
            throw std::invalid_argument("evaluation point missing block: " + blk.name);
        if (it->second.size() != blk.dim)
            throw std::invalid_argument("evaluation point has wrong dimension for block: " +
                                        blk.name);
        for (int i = 0; i < blk.dim; ++i) flat[u.flatIndex(blk.name, i)] = it->second[i];
    }
    return flat;
}

}  // namespace safesynth
