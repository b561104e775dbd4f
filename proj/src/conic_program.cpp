#include "flexcap/conic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

namespace flexcap::conic {

LinExpr LinExpr::variable(int index, double coef) {
    LinExpr e;
    e.terms_.push_back({index, coef});
    return e;
}

LinExpr& LinExpr::add(int var, double coef) {
    if (coef != 0.0) terms_.push_back({var, coef});
    return *this;
}

LinExpr& LinExpr::operator+=(const LinExpr& other) {
    terms_.insert(terms_.end(), other.terms_.begin(), other.terms_.end());
    constant_ += other.constant_;
    return *this;
}

LinExpr& LinExpr::operator-=(const LinExpr& other) {
    terms_.reserve(terms_.size() + other.terms_.size());
    for (const auto& t : other.terms_) terms_.push_back({t.var, -t.coef});
    constant_ -= other.constant_;
    return *this;
}

LinExpr& LinExpr::operator*=(double s) {
    for (auto& t : terms_) t.coef *= s;
    constant_ *= s;
    return *this;
}

void LinExpr::compress() {
    std::sort(terms_.begin(), terms_.end(), [](const Term& a, const Term& b) { return a.var < b.var; });
    std::vector<Term> merged;
    merged.reserve(terms_.size());
    for (const auto& t : terms_) {
        if (!merged.empty() && merged.back().var == t.var) {
            merged.back().coef += t.coef;
        } else {
            merged.push_back(t);
        }
    }
    merged.erase(std::remove_if(merged.begin(), merged.end(), [](const Term& t) { return t.coef == 0.0; }),
                 merged.end());
    terms_ = std::move(merged);
}

double LinExpr::evaluate(const Vec& x) const {
    double v = constant_;
    for (const auto& t : terms_) v += t.coef * x(t.var);
    return v;
}

double LinExpr::evaluate(const std::vector<double>& x) const {
    double v = constant_;
    for (const auto& t : terms_) v += t.coef * x[static_cast<std::size_t>(t.var)];
    return v;
}

double LinExpr::magnitude(const Vec& x) const {
    double v = std::abs(constant_);
    for (const auto& t : terms_) v += std::abs(t.coef * x(t.var));
    return v;
}

LinExpr operator+(LinExpr a, const LinExpr& b) { return a += b; }
LinExpr operator-(LinExpr a, const LinExpr& b) { return a -= b; }
LinExpr operator*(double s, LinExpr a) { return a *= s; }

std::string to_string(Status s) {
    switch (s) {
        case Status::Optimal: return "optimal";
        case Status::Infeasible: return "infeasible";
        case Status::Unbounded: return "unbounded";
        case Status::NumericalLimit: return "numerical-limit";
    }
    return "unknown";
}

void ConicProgram::check_mutable() const {
    if (frozen_) throw ValidationError("conic program is frozen; no further mutation allowed");
}

void ConicProgram::check_expr(const LinExpr& e, const std::string& label) const {
    for (const auto& t : e.terms()) {
        if (t.var < 0 || t.var >= num_vars_) {
            throw ValidationError("row '" + label + "' references unregistered variable " + std::to_string(t.var));
        }
        if (!std::isfinite(t.coef)) throw ValidationError("row '" + label + "' has a non-finite coefficient");
    }
    if (!std::isfinite(e.constant())) throw ValidationError("row '" + label + "' has a non-finite constant");
}

VarBlock ConicProgram::add_variable(const std::string& name, int size) {
    check_mutable();
    if (size < 0) throw ValidationError("variable block '" + name + "' has negative size");
    if (block_index_.count(name)) throw ValidationError("duplicate variable block '" + name + "'");
    VarBlock b{name, num_vars_, size};
    block_index_[name] = static_cast<int>(blocks_.size());
    blocks_.push_back(b);
    num_vars_ += size;
    return b;
}

int ConicProgram::add_equality(LinExpr expr, std::string label) {
    check_mutable();
    check_expr(expr, label);
    expr.compress();
    equalities_.push_back({std::move(expr), std::move(label)});
    return static_cast<int>(equalities_.size()) - 1;
}

int ConicProgram::add_inequality(LinExpr expr, std::string label) {
    check_mutable();
    check_expr(expr, label);
    expr.compress();
    inequalities_.push_back({std::move(expr), std::move(label)});
    return static_cast<int>(inequalities_.size()) - 1;
}

int ConicProgram::add_soc(std::vector<LinExpr> args, LinExpr bound, std::string label) {
    check_mutable();
    for (auto& a : args) {
        check_expr(a, label);
        a.compress();
    }
    check_expr(bound, label);
    bound.compress();
    cones_.push_back({std::move(args), std::move(bound), std::move(label)});
    return static_cast<int>(cones_.size()) - 1;
}

void ConicProgram::set_objective(Sense sense, LinExpr objective) {
    check_mutable();
    check_expr(objective, "objective");
    objective.compress();
    sense_ = sense;
    objective_ = std::move(objective);
}

void ConicProgram::freeze() { frozen_ = true; }

const VarBlock& ConicProgram::block(const std::string& name) const {
    auto it = block_index_.find(name);
    if (it == block_index_.end()) throw ValidationError("unknown variable block '" + name + "'");
    return blocks_[static_cast<std::size_t>(it->second)];
}

namespace {

nlohmann::json expr_json(const LinExpr& e) {
    nlohmann::json idx = nlohmann::json::array();
    nlohmann::json val = nlohmann::json::array();
    for (const auto& t : e.terms()) {
        idx.push_back(t.var);
        val.push_back(t.coef);
    }
    return {{"idx", idx}, {"val", val}, {"const", e.constant()}};
}

}  // namespace

nlohmann::json ConicProgram::dump() const {
    nlohmann::json j;
    j["schema"] = "flexcap.conic.v1";
    j["sense"] = sense_ == Sense::Minimize ? "min" : "max";
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& b : blocks_) blocks.push_back({{"name", b.name}, {"offset", b.offset}, {"size", b.size}});
    j["variables"] = blocks;
    j["objective"] = expr_json(objective_);
    nlohmann::json eq = nlohmann::json::array();
    for (const auto& r : equalities_) eq.push_back({{"label", r.label}, {"expr", expr_json(r.expr)}});
    j["equalities"] = eq;
    nlohmann::json in = nlohmann::json::array();
    for (const auto& r : inequalities_) in.push_back({{"label", r.label}, {"expr", expr_json(r.expr)}});
    j["inequalities"] = in;
    nlohmann::json cs = nlohmann::json::array();
    for (const auto& c : cones_) {
        nlohmann::json args = nlohmann::json::array();
        for (const auto& a : c.args) args.push_back(expr_json(a));
        cs.push_back({{"label", c.label}, {"args", args}, {"bound", expr_json(c.bound)}});
    }
    j["cones"] = cs;
    return j;
}

std::string ConicProgram::fingerprint() const {
    std::ostringstream os;
    os << std::hex << fnv1a64(dump().dump());
    return os.str();
}

StandardForm to_standard_form(const ConicProgram& program) {
    StandardForm sf;
    const int n = program.num_variables();
    sf.c = Vec::Zero(n);
    const double sign = program.sense() == Sense::Maximize ? -1.0 : 1.0;
    for (const auto& t : program.objective().terms()) sf.c(t.var) += sign * t.coef;

    std::vector<Triplet> a_trip;
    std::vector<double> b;
    for (const auto& r : program.equalities()) {
        if (r.expr.is_constant()) {
            if (std::abs(r.expr.constant()) > 1e-12) {
                // Keep the contradiction visible to the engine as 0 = c.
                b.push_back(-r.expr.constant());
            }
            continue;
        }
        const int row = static_cast<int>(b.size());
        for (const auto& t : r.expr.terms()) a_trip.emplace_back(row, t.var, t.coef);
        b.push_back(-r.expr.constant());
    }
    sf.A.resize(static_cast<int>(b.size()), n);
    sf.A.setFromTriplets(a_trip.begin(), a_trip.end());
    sf.b = Eigen::Map<Vec>(b.data(), static_cast<Eigen::Index>(b.size()));

    // Linear part of G: inequalities first, then cones with constant arguments.
    std::vector<Triplet> g_trip;
    std::vector<double> h;
    auto push_linear = [&](const LinExpr& e) {
        const int row = static_cast<int>(h.size());
        for (const auto& t : e.terms()) g_trip.emplace_back(row, t.var, t.coef);
        h.push_back(-e.constant());
    };
    for (const auto& r : program.inequalities()) push_linear(r.expr);

    std::vector<const SecondOrderCone*> true_cones;
    for (const auto& c : program.cones()) {
        bool constant_args = true;
        for (const auto& a : c.args) constant_args = constant_args && a.is_constant();
        if (constant_args) {
            double norm2 = 0.0;
            for (const auto& a : c.args) norm2 += a.constant() * a.constant();
            // ||a|| - bound <= 0
            LinExpr e = -1.0 * c.bound;
            e.add_constant(std::sqrt(norm2));
            push_linear(e);
        } else {
            true_cones.push_back(&c);
        }
    }
    sf.num_linear = static_cast<int>(h.size());

    for (const SecondOrderCone* c : true_cones) {
        // s = (bound, args) with s = h - G x
        int row = static_cast<int>(h.size());
        for (const auto& t : c->bound.terms()) g_trip.emplace_back(row, t.var, -t.coef);
        h.push_back(c->bound.constant());
        int dim = 1;
        for (const auto& a : c->args) {
            if (a.is_constant() && a.constant() == 0.0) continue;
            row = static_cast<int>(h.size());
            for (const auto& t : a.terms()) g_trip.emplace_back(row, t.var, -t.coef);
            h.push_back(a.constant());
            ++dim;
        }
        sf.soc_dims.push_back(dim);
    }
    sf.G.resize(static_cast<int>(h.size()), n);
    sf.G.setFromTriplets(g_trip.begin(), g_trip.end());
    sf.h = Eigen::Map<Vec>(h.data(), static_cast<Eigen::Index>(h.size()));
    return sf;
}

Violation max_violation(const ConicProgram& program, const Vec& x) {
    Violation v;
    for (const auto& r : program.equalities()) {
        const double res = std::abs(r.expr.evaluate(x));
        v.linear = std::max(v.linear, res / (1.0 + r.expr.magnitude(x)));
    }
    for (const auto& r : program.inequalities()) {
        const double res = std::max(0.0, r.expr.evaluate(x));
        v.linear = std::max(v.linear, res / (1.0 + r.expr.magnitude(x)));
    }
    for (const auto& c : program.cones()) {
        double norm2 = 0.0;
        double mag = c.bound.magnitude(x);
        for (const auto& a : c.args) {
            const double av = a.evaluate(x);
            norm2 += av * av;
            mag += a.magnitude(x);
        }
        const double res = std::max(0.0, std::sqrt(norm2) - c.bound.evaluate(x));
        v.cone = std::max(v.cone, res / (1.0 + mag));
    }
    return v;
}

ConicSolution solve(const ConicProgram& program, const Tolerances& tol) {
    auto engine = make_interior_point_engine();
    return solve(program, *engine, tol);
}

ConicSolution solve(const ConicProgram& program, Engine& engine, const Tolerances& tol) {
    if (!program.frozen()) throw ValidationError("conic program must be frozen before solving");
    const auto start = std::chrono::steady_clock::now();
    const StandardForm sf = to_standard_form(program);
    EngineResult er = engine.solve(sf, tol);

    ConicSolution sol;
    sol.status = er.status;
    sol.stats.iterations = er.iterations;
    sol.stats.reduced_accuracy = er.reduced_accuracy;
    sol.x = er.x.size() == program.num_variables() ? er.x : Vec::Zero(program.num_variables());
    if (er.status == Status::Optimal) {
        const Violation v = max_violation(program, sol.x);
        sol.stats.max_linear_violation = v.linear;
        sol.stats.max_cone_violation = v.cone;
        sol.stats.verified = v.linear <= tol.accept && v.cone <= tol.accept;
        if (!sol.stats.verified) sol.status = Status::NumericalLimit;
    }
    sol.objective = program.objective().evaluate(sol.x);
    sol.stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return sol;
}

long long count_cones(long long T, long long n_s, long long n_u, long long N_n, long long N_l, long long N_c,
                      long long N_s) {
    return (n_s + n_u) * (N_n + N_l + 2 * N_c + N_s) * 2 * T;
}

}  // namespace flexcap::conic
