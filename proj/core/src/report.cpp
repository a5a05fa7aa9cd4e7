#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "ergo/dynamics.hpp"

namespace ergo {

namespace {

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

// Per-state partial sums S_n = sum_{m<=n} prod_j f_j(T^{p_j(m)} x), n = 1..maxN.
std::vector<std::vector<Rat>> prefix_sums_exact(const DynSystem& sys,
                                                const GSystem& gsys,
                                                const std::vector<Observable>& fs,
                                                long maxN) {
    std::size_t nstates = sys.state_count();
    long period = sys.period();
    std::vector<std::vector<Rat>> prefix;
    prefix.reserve(static_cast<std::size_t>(maxN));

    std::vector<std::vector<Rat>> fvals(fs.size(), std::vector<Rat>(nstates));
    for (std::size_t j = 0; j < fs.size(); ++j)
        for (std::size_t x = 0; x < nstates; ++x) fvals[j][x] = fs[j].eval_rat(sys, x);

    std::vector<std::vector<std::vector<std::uint32_t>>> tables(gsys.size());
    for (std::size_t j = 0; j < gsys.size(); ++j)
        for (long r = 0; r < period; ++r)
            tables[j].push_back(sys.act_permutation(gsys[j].eval({{"n", Int(r)}})));

    std::vector<Rat> acc(nstates, Rat(0));
    for (long n = 1; n <= maxN; ++n) {
        std::size_t slot = static_cast<std::size_t>(n % period);
        for (std::size_t x = 0; x < nstates; ++x) {
            Rat term(1);
            for (std::size_t j = 0; j < fs.size(); ++j)
                term *= fvals[j][tables[j][slot][x]];
            acc[x] += term;
        }
        prefix.push_back(acc);
    }
    return prefix;
}

Rat diff_l2_sq(const std::vector<Rat>& sa, long na, const std::vector<Rat>& sb, long nb) {
    Rat s(0);
    for (std::size_t x = 0; x < sa.size(); ++x) {
        Rat d = sa[x] / na - sb[x] / nb;
        s += d * d;
    }
    return s / static_cast<long>(sa.size());
}

Rat norm_l2_sq(const std::vector<Rat>& sums, long n) {
    Rat s(0);
    for (const auto& v : sums) {
        Rat a = v / n;
        s += a * a;
    }
    return s / static_cast<long>(sums.size());
}

} // namespace

AverageReport convergence_report(const DynSystem& sys, const GSystem& gsys,
                                 const std::vector<Observable>& fs,
                                 const std::vector<long>& n_grid, double L,
                                 double epsilon, std::size_t samples,
                                 std::uint64_t seed) {
    if (!std::is_sorted(n_grid.begin(), n_grid.end()))
        throw StructuralError("N-grid must be increasing");
    if (L <= 1) throw StructuralError("window factor L must exceed 1");

    AverageReport report;
    report.L = L;
    report.epsilon = epsilon;
    if (n_grid.empty()) {
        report.estimator = sys.finite() ? "exact" : "mc";
        return report;
    }
    long maxN = static_cast<long>(std::floor(L * static_cast<double>(n_grid.back())));

    if (sys.finite()) {
        report.estimator = "exact";
        auto prefix = prefix_sums_exact(sys, gsys, fs, maxN);
        for (long N : n_grid) {
            ReportRow row;
            row.N = N;
            row.estimator = "exact";
            row.std_error = 0;
            const auto& sN = prefix[static_cast<std::size_t>(N - 1)];
            row.l2_norm = std::sqrt(norm_l2_sq(sN, N).get_d());
            Rat worst(0);
            long hi = std::min<long>(maxN, static_cast<long>(std::floor(L * N)));
            for (long Np = N; Np <= hi; ++Np) {
                Rat d = diff_l2_sq(sN, N, prefix[static_cast<std::size_t>(Np - 1)], Np);
                if (d > worst) worst = d;
            }
            row.window_sup_dev = std::sqrt(worst.get_d());
            row.below_epsilon = row.window_sup_dev < epsilon;
            report.rows.push_back(std::move(row));
        }
        return report;
    }

    // torus: seeded Monte Carlo over sample points, shared across the grid
    report.estimator = "mc";
    report.seed = seed;
    report.samples = samples ? samples : 2048;
    SampledAverage base = lambda_sampled(sys, gsys, fs, maxN, report.samples, seed);
    // rebuild partial sums per sample by re-running the accumulation
    std::size_t M = report.samples;
    std::vector<std::vector<std::complex<double>>> partial(
        static_cast<std::size_t>(maxN), std::vector<std::complex<double>>(M));
    {
        // lambda_sampled averages at maxN only; recompute the running sums here
        // with the same seeded points.
        std::vector<std::vector<double>> pts = base.points;
        std::size_t tdim = static_cast<std::size_t>(sys.torus_dim());
        std::vector<std::vector<std::vector<double>>> offset(
            gsys.size(), std::vector<std::vector<double>>(static_cast<std::size_t>(maxN)));
        for (std::size_t j = 0; j < gsys.size(); ++j)
            for (long n = 1; n <= maxN; ++n) {
                IntMatrix g = gsys[j].eval({{"n", Int(n)}});
                std::vector<double> off(tdim);
                for (std::size_t c = 0; c < tdim; ++c)
                    off[c] = g.at(0, static_cast<int>(c) + 1).get_d() * sys.rotation()[c];
                offset[j][static_cast<std::size_t>(n - 1)] = std::move(off);
            }
        std::vector<double> y(tdim);
        for (std::size_t s = 0; s < M; ++s) {
            std::complex<double> acc = 0.0;
            for (long n = 1; n <= maxN; ++n) {
                std::complex<double> term = 1.0;
                for (std::size_t j = 0; j < gsys.size(); ++j) {
                    const auto& off = offset[j][static_cast<std::size_t>(n - 1)];
                    for (std::size_t c = 0; c < tdim; ++c) {
                        double v = pts[s][c] + off[c];
                        y[c] = v - std::floor(v);
                    }
                    term *= fs[j].eval_point(sys, y);
                }
                acc += term;
                partial[static_cast<std::size_t>(n - 1)][s] = acc;
            }
        }
    }

    auto mc_l2 = [&](long Na, long Nb, double& out_se) {
        // mean over samples of |S_Na/Na - S_Nb/Nb|^2, with standard error
        const auto& A = partial[static_cast<std::size_t>(Na - 1)];
        const auto& B = partial[static_cast<std::size_t>(Nb - 1)];
        double mean = 0, sq = 0;
        for (std::size_t s = 0; s < M; ++s) {
            std::complex<double> d = A[s] / static_cast<double>(Na);
            if (Nb > 0) d -= B[s] / static_cast<double>(Nb);
            double v = std::norm(d);
            mean += v;
            sq += v * v;
        }
        mean /= static_cast<double>(M);
        double var = sq / static_cast<double>(M) - mean * mean;
        out_se = std::sqrt(std::max(var, 0.0) / static_cast<double>(M));
        return mean;
    };

    for (long N : n_grid) {
        ReportRow row;
        row.N = N;
        row.estimator = "mc";
        double se = 0;
        // |S_N/N - 0|^2: pass Nb = -1 as "zero"
        const auto& A = partial[static_cast<std::size_t>(N - 1)];
        double mean = 0, sq = 0;
        for (std::size_t s = 0; s < M; ++s) {
            double v = std::norm(A[s] / static_cast<double>(N));
            mean += v;
            sq += v * v;
        }
        mean /= static_cast<double>(M);
        double var = sq / static_cast<double>(M) - mean * mean;
        row.l2_norm = std::sqrt(mean);
        row.std_error = std::sqrt(std::max(var, 0.0) / static_cast<double>(M));

        double worst = 0;
        long hi = std::min<long>(maxN, static_cast<long>(std::floor(L * N)));
        for (long Np = N; Np <= hi; ++Np) {
            double d = mc_l2(N, Np, se);
            worst = std::max(worst, d);
        }
        row.window_sup_dev = std::sqrt(worst);
        row.below_epsilon = row.window_sup_dev < epsilon;
        report.rows.push_back(std::move(row));
    }
    return report;
}

std::string report_csv(const AverageReport& report) {
    std::ostringstream out;
    out << "N,window_sup_dev,l2_norm,estimator,stderr\n";
    for (const auto& r : report.rows)
        out << r.N << "," << fmt(r.window_sup_dev) << "," << fmt(r.l2_norm) << ","
            << r.estimator << "," << fmt(r.std_error) << "\n";
    return out.str();
}

std::string report_json(const AverageReport& report) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["L"] = report.L;
    j["epsilon"] = report.epsilon;
    j["estimator"] = report.estimator;
    if (report.estimator == "mc") {
        j["seed"] = report.seed;
        j["samples"] = report.samples;
    }
    j["rows"] = nlohmann::ordered_json::array();
    for (const auto& r : report.rows) {
        nlohmann::ordered_json row;
        row["N"] = r.N;
        row["window_sup_dev"] = r.window_sup_dev;
        row["l2_norm"] = r.l2_norm;
        row["estimator"] = r.estimator;
        row["stderr"] = r.std_error;
        row["below_epsilon"] = r.below_epsilon;
        j["rows"].push_back(row);
    }
    return j.dump(2) + "\n";
}

std::string report_svg(const AverageReport& report) {
    const double W = 640, H = 400, ml = 60, mr = 20, mt = 20, mb = 40;
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\""
        << H << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    out << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr
        << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
        << H - mb << "\" stroke=\"black\"/>\n";
    if (!report.rows.empty()) {
        double xmin = static_cast<double>(report.rows.front().N);
        double xmax = static_cast<double>(report.rows.back().N);
        double ymax = 0;
        for (const auto& r : report.rows) ymax = std::max(ymax, r.window_sup_dev);
        if (ymax <= 0) ymax = 1;
        if (xmax <= xmin) xmax = xmin + 1;
        out << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
        for (const auto& r : report.rows) {
            double px = ml + (static_cast<double>(r.N) - xmin) / (xmax - xmin) *
                                 (W - ml - mr);
            double py = H - mb - r.window_sup_dev / ymax * (H - mt - mb);
            out << fmt(px) << "," << fmt(py) << " ";
        }
        out << "\"/>\n";
        out << "<text x=\"" << (W / 2) << "\" y=\"" << (H - 8)
            << "\" text-anchor=\"middle\" font-size=\"12\">N</text>\n";
        out << "<text x=\"14\" y=\"" << (H / 2)
            << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 "
            << (H / 2) << ")\">window sup deviation</text>\n";
        out << "<text x=\"" << (W - mr) << "\" y=\"" << (mt + 4)
            << "\" text-anchor=\"end\" font-size=\"10\">max " << fmt(ymax)
            << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

} // namespace ergo
