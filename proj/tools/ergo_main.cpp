#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <random>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ergo/couplings.hpp"
#include "ergo/dynamics.hpp"
#include "ergo/reduction.hpp"

using namespace ergo;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvariant = 1;  // a theorem-level identity failed: always a bug
constexpr int kExitConfig = 2;
constexpr int kExitExceeded = 3;

struct CliError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void reject_unknown(const json& j, const std::string& where,
                    const std::set<std::string>& allowed) {
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key))
            throw CliError("unknown field '" + key + "' in " + where);
}

Rat parse_rat(const std::string& text) {
    Rat r;
    if (r.set_str(text, 10) != 0)
        throw CliError("cannot parse rational '" + text + "'");
    r.canonicalize();
    return r;
}

struct Config {
    int schema_version = 1;
    GSystem system;
    bool has_dynamics = false;
    DynSystem dynamics = DynSystem::cyclic_product({2});
    std::vector<Observable> observables;
    std::vector<long> n_grid;
    double L = 2.0;
    double epsilon = 0.01;
    // couple section
    long couple_from = 1, couple_to = 0;
    std::vector<long> couple_N;
    std::string closure = "subgroup"; // none | group | subgroup
    long outer_length = 3;
    bool dump_coupling = false;
    std::optional<Observable> f_k;
    // search
    int max_depth = 6;
    bool allow_initial_reorder = true;
    bool prune_dominated = false;
    // sampling
    std::uint64_t seed = 1;
    std::size_t samples = 2048;
    std::string mode = "exact";
    std::string out_prefix = "run";
};

Observable parse_observable(const json& j) {
    reject_unknown(j, "observable", {"kind", "subset", "freq", "values"});
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "indicator") {
        std::vector<std::size_t> subset;
        for (const auto& s : j.at("subset")) subset.push_back(s.get<std::size_t>());
        return Observable::indicator(std::move(subset));
    }
    if (kind == "character") {
        std::vector<long> freq;
        for (const auto& f : j.at("freq")) freq.push_back(f.get<long>());
        return Observable::character(std::move(freq));
    }
    if (kind == "tabulated") {
        std::vector<Rat> values;
        for (const auto& v : j.at("values")) values.push_back(parse_rat(v.get<std::string>()));
        return Observable::tabulated(std::move(values));
    }
    throw CliError("unknown observable kind '" + kind + "'");
}

GSystem parse_system(const json& j) {
    reject_unknown(j, "system", {"dim", "level", "entries"});
    int dim = j.at("dim").get<int>();
    int level = j.value("level", 0);
    std::vector<NilSeq> entries;
    for (const auto& m : j.at("entries")) {
        // entries come as row lists of polynomial strings
        std::ostringstream flat;
        flat << "[";
        bool firstrow = true;
        for (const auto& row : m) {
            flat << (firstrow ? "[" : ", [");
            firstrow = false;
            bool firstcell = true;
            for (const auto& cell : row) {
                flat << (firstcell ? "" : ", ") << cell.get<std::string>();
                firstcell = false;
            }
            flat << "]";
        }
        flat << "]";
        entries.push_back(NilSeq::parse(flat.str(), dim, level));
    }
    return GSystem(std::move(entries));
}

DynSystem parse_dynamics(const json& j) {
    reject_unknown(j, "dynamics", {"kind", "moduli", "modulus", "dim", "rotation"});
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "cyclic_product") {
        std::vector<long> moduli;
        for (const auto& q : j.at("moduli")) moduli.push_back(q.get<long>());
        return DynSystem::cyclic_product(std::move(moduli));
    }
    if (kind == "group_translation")
        return DynSystem::group_translation(j.at("modulus").get<long>(), j.value("dim", 3));
    if (kind == "torus_rotation") {
        std::vector<double> rot;
        for (const auto& a : j.at("rotation")) rot.push_back(a.get<double>());
        return DynSystem::torus_rotation(std::move(rot));
    }
    throw CliError("unknown dynamics kind '" + kind + "'");
}

Config parse_config(const std::string& path, json* original = nullptr) {
    std::ifstream in(path);
    if (!in) throw CliError("cannot open config '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw CliError(std::string("config parse error: ") + e.what());
    }
    if (original) *original = j;
    reject_unknown(j, "config",
                   {"schema_version", "system", "dynamics", "observables", "grid",
                    "couple", "max_depth", "allow_initial_reorder", "prune_dominated",
                    "seed", "samples", "mode", "out_prefix"});
    Config cfg;
    cfg.schema_version = j.at("schema_version").get<int>();
    if (cfg.schema_version != 1) throw CliError("unsupported schema_version");
    cfg.system = parse_system(j.at("system"));
    if (j.contains("dynamics")) {
        cfg.dynamics = parse_dynamics(j.at("dynamics"));
        cfg.has_dynamics = true;
    }
    if (j.contains("observables"))
        for (const auto& o : j.at("observables")) cfg.observables.push_back(parse_observable(o));
    if (j.contains("grid")) {
        reject_unknown(j.at("grid"), "grid", {"N", "L", "epsilon"});
        for (const auto& n : j.at("grid").at("N")) cfg.n_grid.push_back(n.get<long>());
        cfg.L = j.at("grid").value("L", 2.0);
        cfg.epsilon = j.at("grid").value("epsilon", 0.01);
    }
    if (j.contains("couple")) {
        const json& c = j.at("couple");
        reject_unknown(c, "couple",
                       {"n_from", "n_to", "N", "closure", "outer_length", "dump", "f_k"});
        cfg.couple_from = c.value("n_from", 1L);
        cfg.couple_to = c.value("n_to", 0L);
        if (c.contains("N"))
            for (const auto& n : c.at("N")) cfg.couple_N.push_back(n.get<long>());
        cfg.closure = c.value("closure", std::string("subgroup"));
        if (cfg.closure != "none" && cfg.closure != "group" && cfg.closure != "subgroup")
            throw CliError("couple.closure must be none, group or subgroup");
        cfg.outer_length = c.value("outer_length", 3L);
        cfg.dump_coupling = c.value("dump", false);
        if (c.contains("f_k")) cfg.f_k = parse_observable(c.at("f_k"));
    }
    cfg.max_depth = j.value("max_depth", 6);
    cfg.allow_initial_reorder = j.value("allow_initial_reorder", true);
    cfg.prune_dominated = j.value("prune_dominated", false);
    cfg.seed = j.value("seed", 1ULL);
    cfg.samples = j.value("samples", std::size_t{2048});
    cfg.mode = j.value("mode", std::string("exact"));
    cfg.out_prefix = j.value("out_prefix", std::string("run"));
    if (cfg.mode != "exact" && cfg.mode != "sampled")
        throw CliError("mode must be 'exact' or 'sampled'");
    return cfg;
}

ordered_json config_json(const Config& cfg, const json& original) {
    // canonical serialization: the original fields in schema order with
    // defaults materialized; unknown fields were already rejected
    ordered_json j;
    j["schema_version"] = cfg.schema_version;
    ordered_json sys;
    sys["dim"] = cfg.system.dim();
    sys["level"] = cfg.system.level();
    sys["entries"] = ordered_json::array();
    for (const auto& e : cfg.system.entries()) {
        ordered_json m = ordered_json::array();
        for (int i = 0; i < e.dim(); ++i) {
            ordered_json row = ordered_json::array();
            for (int c = 0; c < e.dim(); ++c) row.push_back(e.at(i, c).to_string());
            m.push_back(std::move(row));
        }
        sys["entries"].push_back(std::move(m));
    }
    j["system"] = std::move(sys);
    for (const char* key : {"dynamics", "observables", "grid", "couple"})
        if (original.contains(key)) j[key] = original.at(key);
    j["max_depth"] = cfg.max_depth;
    j["allow_initial_reorder"] = cfg.allow_initial_reorder;
    j["prune_dominated"] = cfg.prune_dominated;
    j["seed"] = cfg.seed;
    j["samples"] = cfg.samples;
    j["mode"] = cfg.mode;
    j["out_prefix"] = cfg.out_prefix;
    return j;
}

std::filesystem::path out_dir(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("ERGO_OUT_DIR")) return env;
    return ".";
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path().empty() ? "."
                                                                   : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CliError("cannot write '" + path.string() + "'");
    out << content;
}

ordered_json gsystem_json(const GSystem& sys) {
    ordered_json j;
    j["dim"] = sys.dim();
    j["level"] = sys.level();
    j["entries"] = ordered_json::array();
    for (const auto& e : sys.entries()) j["entries"].push_back(e.to_string());
    return j;
}

ordered_json trace_json(const ReductionTrace& trace) {
    ordered_json j;
    j["initial"] = gsystem_json(trace.initial);
    j["reductions"] = trace.reductions;
    j["steps"] = ordered_json::array();
    for (const auto& s : trace.steps) {
        ordered_json step;
        switch (s.op) {
            case TraceStep::Op::Reorder: {
                step["op"] = "reorder";
                step["perm"] = s.perm;
                break;
            }
            case TraceStep::Op::Dedupe: {
                step["op"] = "dedupe";
                step["removed"] = s.removed;
                break;
            }
            case TraceStep::Op::Reduce: step["op"] = "reduce"; break;
        }
        step["snapshot"] = gsystem_json(s.snapshot);
        j["steps"].push_back(std::move(step));
    }
    return j;
}

int cmd_complexity(const Config& cfg, const std::filesystem::path& dir, int max_depth) {
    ComplexityOptions opts;
    opts.max_depth = max_depth >= 0 ? max_depth : cfg.max_depth;
    opts.allow_initial_reorder = cfg.allow_initial_reorder;
    opts.prune_dominated = cfg.prune_dominated;
    auto res = complexity(cfg.system, opts);
    if (!res) {
        std::cout << "complexity: exceeded max_depth " << opts.max_depth << "\n";
        return kExitExceeded;
    }
    if (!res->trace.replays())
        throw InvariantViolation("complexity witness trace does not replay");
    ordered_json j;
    j["schema_version"] = 1;
    j["value"] = res->value;
    j["trace"] = trace_json(res->trace);
    write_file(dir / (cfg.out_prefix + "_complexity.json"), j.dump(2) + "\n");
    std::cout << "complexity: " << res->value << "\n";
    return kExitOk;
}

int cmd_average(const Config& cfg, const std::filesystem::path& dir,
                const std::string& format, const std::string& mode_flag,
                std::uint64_t seed_flag) {
    if (!cfg.has_dynamics) throw CliError("average needs a dynamics section");
    if (cfg.observables.size() != cfg.system.size())
        throw CliError("need one observable per system entry");
    if (cfg.n_grid.empty()) throw CliError("average needs a grid section");
    std::string mode = mode_flag.empty() ? cfg.mode : mode_flag;
    std::uint64_t seed = seed_flag ? seed_flag : cfg.seed;
    if (mode == "exact" && !cfg.dynamics.finite())
        throw CliError("exact averages need a finite system; use --sampled");

    AverageReport report = convergence_report(cfg.dynamics, cfg.system, cfg.observables,
                                              cfg.n_grid, cfg.L, cfg.epsilon,
                                              cfg.samples, seed);
    std::string payload;
    std::string ext = format;
    if (format == "csv")
        payload = report_csv(report);
    else if (format == "json")
        payload = report_json(report);
    else if (format == "svg")
        payload = report_svg(report);
    else
        throw CliError("unknown format '" + format + "'");
    write_file(dir / (cfg.out_prefix + "_average." + ext), payload);
    std::cout << "average: " << report.rows.size() << " grid points ("
              << report.estimator << ")\n";
    return kExitOk;
}

int cmd_couple(const Config& cfg, const std::filesystem::path& dir) {
    if (!cfg.has_dynamics || !cfg.dynamics.finite())
        throw CliError("couple needs a finite dynamics section");
    if (cfg.observables.size() != cfg.system.size())
        throw CliError("need k-1 observables plus last = k total in 'observables'");
    std::vector<Observable> fs(cfg.observables.begin(), cfg.observables.end() - 1);
    Observable last = cfg.observables.back();

    WindowOptions wopts;
    wopts.n_from = cfg.couple_from;
    wopts.n_to = cfg.couple_to > 0 ? cfg.couple_to : cfg.dynamics.period();
    wopts.close_to_subgroup = cfg.closure == "subgroup";
    wopts.close_under_alpha = cfg.closure != "none";
    wopts.close_under_group = cfg.closure != "none";
    auto window =
        std::make_shared<IndexWindow>(build_window(cfg.dynamics, cfg.system, wopts));

    std::vector<long> grid = cfg.couple_N.empty() ? cfg.n_grid : cfg.couple_N;
    if (grid.empty()) throw CliError("couple needs N values (couple.N or grid.N)");

    auto gens = [&] {
        std::vector<IntMatrix> out;
        int d = cfg.dynamics.dim();
        if (cfg.dynamics.kind() == SystemKind::CyclicProduct) {
            for (int c = 1; c < d; ++c) {
                IntMatrix g = IntMatrix::identity(d);
                g.at(0, c) = 1;
                out.push_back(g);
            }
        } else {
            for (int i = 0; i < d; ++i)
                for (int jj = i + 1; jj < d; ++jj) {
                    IntMatrix g = IntMatrix::identity(d);
                    g.at(i, jj) = 1;
                    out.push_back(g);
                }
        }
        return out;
    }();

    bool all_hold = true;
    ordered_json report;
    report["schema_version"] = 1;
    report["window_size"] = window->size();
    report["runs"] = ordered_json::array();
    for (long N : grid) {
        auto c = empirical_coupling(cfg.dynamics, cfg.system, fs, last, window, N);
        ordered_json run;
        run["N"] = N;

        bool diag = true;
        for (const auto& g : gens) diag = diag && check_diag_invariance(c, g);
        run["diag_invariant"] = diag;

        Rat tv = check_alpha_invariance(c);
        run["alpha_tv"] = ordered_json::array(
            {tv.get_num().get_str(), tv.get_den().get_str()});
        bool alpha_ok = tv <= frac(2, N) && tv == alpha_boundary_prediction(c);
        run["alpha_within_bound"] = alpha_ok;

        std::size_t closed = 0, hold = 0;
        for (const auto& r : window->elements()) {
            if (!window->closed_under_translation(r)) continue;
            ++closed;
            if (check_marginal_S_invariance(c, r)) ++hold;
        }
        run["marginal_closed"] = closed;
        run["marginal_hold"] = hold;

        if (cfg.f_k) {
            auto pr = pairing(c, *cfg.f_k);
            run["pairing_agree"] = pr.agree();
            if (!pr.agree()) all_hold = false;
        }

        auto chain = cond_exp_identity_check(c, cfg.outer_length);
        run["chain_discrepancy"] = chain.chain_discrepancy.get_str();
        run["alpha_discrepancy"] = chain.alpha_discrepancy.get_str();
        run["alpha_budget"] = chain.budget.get_str();
        run["alpha_exact"] = chain.alpha_exact;
        bool chain_ok = chain.chain_discrepancy == 0 &&
                        chain.alpha_discrepancy <= chain.budget &&
                        (!chain.alpha_exact || chain.alpha_discrepancy == 0);

        if (!diag || !alpha_ok || hold != closed || !chain_ok) all_hold = false;
        report["runs"].push_back(std::move(run));

        if (cfg.dump_coupling)
            write_file(dir / (cfg.out_prefix + "_coupling_N" + std::to_string(N) + ".json"),
                       coupling_to_json(c));
    }
    report["all_hold"] = all_hold;
    write_file(dir / (cfg.out_prefix + "_couple.json"), report.dump(2) + "\n");
    std::cout << "couple: " << grid.size() << " runs, window " << window->size()
              << (all_hold ? ", all invariances hold" : ", VIOLATION FOUND") << "\n";
    return all_hold ? kExitOk : kExitInvariant;
}

int cmd_verify(const Config& cfg, const std::filesystem::path& dir) {
    std::vector<std::string> lines;
    bool ok = true;
    auto record = [&](const std::string& name, bool pass) {
        lines.push_back(std::string(pass ? "PASS" : "FAIL") + " " + name);
        std::cout << lines.back() << "\n";
        ok = ok && pass;
    };

    // rearrangement lemma on the configured system's group elements
    {
        bool pass = true;
        std::mt19937_64 rng(cfg.seed);
        for (int i = 0; i < 200 && pass; ++i) {
            auto vars = level_vars(1);
            auto rnd_poly = [&](unsigned deg) {
                MultiPoly p(vars);
                for (unsigned d = 0; d <= deg; ++d) {
                    long coeff = static_cast<long>(rng() % 7) - 3;
                    MultiPoly mono = MultiPoly::constant(vars, coeff);
                    for (unsigned t = 0; t < d; ++t)
                        mono = mono * MultiPoly::variable(vars, "m1");
                    p = p + mono;
                }
                return p;
            };
            NilSeq r = NilSeq::identity(cfg.system.dim(), 1);
            NilSeq p = NilSeq::identity(cfg.system.dim(), 1);
            for (int a = 0; a < cfg.system.dim(); ++a)
                for (int b = a + 1; b < cfg.system.dim(); ++b) {
                    r.set(a, b, rnd_poly(2));
                    p.set(a, b, rnd_poly(2));
                }
            long n = static_cast<long>(rng() % 9) - 4;
            pass = canon_rearrange_indices(r, p, n).equal();
        }
        record("rearrangement-lemma-indices", pass);
    }

    if (cfg.has_dynamics && cfg.dynamics.finite() && !cfg.observables.empty() &&
        cfg.observables.size() == cfg.system.size()) {
        std::vector<Observable> fs(cfg.observables.begin(), cfg.observables.end() - 1);
        Observable last = cfg.observables.back();
        WindowOptions wopts;
        wopts.n_from = cfg.couple_from;
        wopts.n_to = cfg.couple_to > 0 ? cfg.couple_to : cfg.dynamics.period();
        wopts.close_to_subgroup = cfg.closure == "subgroup";
        wopts.close_under_alpha = cfg.closure != "none";
        wopts.close_under_group = cfg.closure != "none";
        auto window =
            std::make_shared<IndexWindow>(build_window(cfg.dynamics, cfg.system, wopts));
        std::vector<long> grid = cfg.couple_N.empty() ? cfg.n_grid : cfg.couple_N;
        if (grid.empty()) grid = {cfg.dynamics.period(), 2 * cfg.dynamics.period() + 1};

        bool pair_ok = true, alpha_ok = true, chain_ok = true, marg_ok = true;
        for (long N : grid) {
            auto c = empirical_coupling(cfg.dynamics, cfg.system, fs, last, window, N);
            if (cfg.f_k) pair_ok = pair_ok && pairing(c, *cfg.f_k).agree();
            Rat tv = check_alpha_invariance(c);
            alpha_ok = alpha_ok && tv <= frac(2, N) && tv == alpha_boundary_prediction(c);
            auto chain = cond_exp_identity_check(c, cfg.outer_length);
            chain_ok = chain_ok && chain.chain_discrepancy == 0 &&
                       chain.alpha_discrepancy <= chain.budget;
            for (const auto& r : window->elements())
                if (window->closed_under_translation(r))
                    marg_ok = marg_ok && check_marginal_S_invariance(c, r);
        }
        record("pairing-rearrangement", pair_ok);
        record("alpha-shift-bound", alpha_ok);
        record("identity-chain", chain_ok);
        record("marginal-invariance", marg_ok);
    }

    std::string payload;
    for (const auto& l : lines) payload += l + "\n";
    write_file(dir / (cfg.out_prefix + "_verify.txt"), payload);
    return ok ? kExitOk : kExitInvariant;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"workbench for nonconventional ergodic averages over polynomial "
                 "sequences in unitriangular groups"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::string out_flag;
    std::string format = "csv";
    std::string mode_flag;
    std::uint64_t seed_flag = 0;
    int max_depth_flag = -1;

    app.add_option("--config", config_path, "experiment config (JSON)")->required();
    app.add_option("--out", out_flag, "output directory (default $ERGO_OUT_DIR or .)");
    std::string dump_config_path;
    app.add_option("--dump-config", dump_config_path,
                   "write the canonical serialization of the parsed config");
    app.add_option("--seed", seed_flag, "override the config seed");
    app.add_option("--max-depth", max_depth_flag, "override the search depth bound");
    app.add_option("--format", format, "report format: csv, json or svg")
        ->check(CLI::IsMember({"csv", "json", "svg"}));
    bool exact_flag = false, sampled_flag = false;
    app.add_flag("--exact", exact_flag, "force exact evaluation");
    app.add_flag("--sampled", sampled_flag, "force Monte Carlo evaluation");

    auto* c_complexity = app.add_subcommand("complexity", "reduction-count search");
    auto* c_average = app.add_subcommand("average", "Cesaro average reports");
    auto* c_couple = app.add_subcommand("couple", "empirical coupling invariance suite");
    auto* c_verify = app.add_subcommand("verify", "identity and lemma batteries");

    CLI11_PARSE(app, argc, argv);
    if (exact_flag && sampled_flag) {
        std::cerr << "error: --exact and --sampled are mutually exclusive\n";
        return kExitConfig;
    }
    if (exact_flag) mode_flag = "exact";
    if (sampled_flag) mode_flag = "sampled";

    try {
        json original;
        Config cfg = parse_config(config_path, &original);
        std::filesystem::path dir = out_dir(out_flag);
        if (!dump_config_path.empty())
            write_file(dump_config_path, config_json(cfg, original).dump(2) + "\n");
        if (c_complexity->parsed()) return cmd_complexity(cfg, dir, max_depth_flag);
        if (c_average->parsed()) return cmd_average(cfg, dir, format, mode_flag, seed_flag);
        if (c_couple->parsed()) return cmd_couple(cfg, dir);
        if (c_verify->parsed()) return cmd_verify(cfg, dir);
        return kExitConfig;
    } catch (const CliError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ClosureError& e) {
        std::cerr << "closure error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const InvariantViolation& e) {
        std::cerr << "invariant violation: " << e.what() << "\n";
        return kExitInvariant;
    } catch (const StructuralError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
}
