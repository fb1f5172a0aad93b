// nahmlab command line: integrate Nahm flows on co-Higgs data, audit the
// conserved quantities, solve for flow fixed points, and run the ribbon
// divisor diagnostics.  Structured output is JSON, trajectories are CSV.
//
// Exit codes: 0 ok, 2 malformed input, 3 blow-up, 4 drift violation,
// 5 not a ribbon (characteristic polynomial is not a perfect square).

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <future>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "nahmlab/fixed_points.hpp"
#include "nahmlab/flow.hpp"
#include "nahmlab/io.hpp"
#include "nahmlab/moduli.hpp"
#include "nahmlab/ribbon.hpp"
#include "nahmlab/spectral.hpp"

namespace {

using namespace nahmlab;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitBlowUp = 3;
constexpr int kExitDrift = 4;
constexpr int kExitNotRibbon = 5;

json poly_to_json(const Poly& p) {
    json a = json::array();
    for (int k = 0; k <= p.degree(); ++k) a.push_back(detail::complex_to_json(p.coeff(k)));
    return a;
}

json bivariate_to_json(const Bivariate& p) {
    json a = json::array();
    for (const auto& c : p.wc) a.push_back(poly_to_json(c));
    return a;
}

void write_json(const fs::path& path, const json& j) { atomic_write(path, j.dump(2) + "\n"); }

struct IntegrateArgs {
    std::string input;
    std::string out = ".";
    std::string form;
    double t_end = 0.0;
    double dt = 0.0;
    unsigned seed = 0;
    int jobs = 1;
};

int run_one_integration(const json& doc, const IntegrateArgs& args, const std::string& suffix) {
    const InputDocument in = parse_input_document(doc);
    std::optional<FlowForm> override;
    if (!args.form.empty()) override = parse_form(args.form);
    const NahmState s0 = state_from_document(in, override);

    const Trajectory traj = integrate(s0, args.t_end, args.dt);

    const fs::path out_dir(args.out);
    fs::create_directories(out_dir);
    const fs::path traj_path = out_dir / ("traj" + suffix + ".csv");
    write_trajectory_csv(traj_path, traj);

    json manifest = {
        {"command", "integrate"},
        {"seed", args.seed},
        {"dt", args.dt},
        {"t_end", args.t_end},
        {"form", form_name(traj.form)},
        {"n", traj.dim()},
        {"block_split", traj.block_split},
        {"blow_up", traj.blew_up},
        {"samples", traj.samples.size()},
        {"error_estimate", traj.error_estimate},
        {"outputs", {traj_path.string()}},
    };
    if (traj.blew_up) manifest["blow_up_time"] = traj.blow_up_time;
    write_json(out_dir / ("manifest" + suffix + ".json"), manifest);

    if (traj.blew_up) {
        std::cerr << "blow-up at t = " << traj.blow_up_time << "; last finite state written\n";
        return kExitBlowUp;
    }
    return kExitOk;
}

int cmd_integrate(const IntegrateArgs& args) {
    std::ifstream in(args.input);
    if (!in) throw input_error("cannot open input file: " + args.input);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw input_error("JSON parse error in " + args.input + ": " + e.what());
    }

    if (j.is_object()) return run_one_integration(j, args, "");
    if (!j.is_array() || j.empty())
        throw input_error("document: expected an object or a non-empty array of objects");

    // parameter sweep: one trajectory per entry, optionally in parallel
    std::vector<std::future<int>> futs;
    std::vector<int> codes(j.size(), kExitOk);
    const int jobs = std::max(1, args.jobs);
    for (size_t i = 0; i < j.size(); ++i) {
        char suffix[16];
        std::snprintf(suffix, sizeof(suffix), "_%03zu", i);
        if (jobs == 1) {
            codes[i] = run_one_integration(j[i], args, suffix);
        } else {
            futs.push_back(std::async(std::launch::async, run_one_integration, j[i], args,
                                      std::string(suffix)));
            if (futs.size() >= static_cast<size_t>(jobs) || i + 1 == j.size()) {
                for (size_t k = 0; k < futs.size(); ++k)
                    codes[i - futs.size() + 1 + k] = futs[k].get();
                futs.clear();
            }
        }
    }
    for (int c : codes)
        if (c != kExitOk) return c;
    return kExitOk;
}

int cmd_invariants(const std::string& input, double tol, const std::string& out) {
    const Trajectory traj = read_trajectory_csv(input);
    const DriftReport rep = conservation_drift(traj);

    json entries = json::array();
    for (const auto& e : rep.per_ak)
        entries.push_back({{"k", e.k}, {"max_dev", e.max_dev}, {"t_at_max", e.t_at_max}});
    const json report = {
        {"command", "invariants"},
        {"samples", traj.samples.size()},
        {"tol", tol},
        {"max_drift", rep.max_dev},
        {"t_at_max", rep.t_at_max},
        {"per_coefficient", entries},
        {"pass", rep.max_dev < tol},
    };
    fs::create_directories(out);
    write_json(fs::path(out) / "report.json", report);
    std::cout << "max spectral drift " << rep.max_dev << " at t = " << rep.t_at_max
              << (rep.max_dev < tol ? " (ok)" : " (VIOLATION)") << "\n";
    return rep.max_dev < tol ? kExitOk : kExitDrift;
}

MatrixPoly higgs_from_document(const InputDocument& doc, bool family) {
    if (family) {
        if (!doc.a || !doc.phi1)
            throw input_error("metadata: --family requires metadata.a and metadata.phi1");
        return Rank2Family{*doc.a, *doc.phi1}.phi();
    }
    if (doc.coeffs.size() != 3)
        throw input_error("coeffs: a degree-2 field needs exactly 3 coefficient matrices");
    return MatrixPoly(doc.n, doc.coeffs);
}

int cmd_fixed_point(const std::string& input, bool family, double tol, const std::string& out,
                    unsigned seed) {
    const InputDocument doc = load_input_document(input);
    const MatrixPoly phi = higgs_from_document(doc, family);
    const FixedPointWitness w = solve_psi(phi, tol);

    json report = {
        {"command", "fixed-point"},
        {"n", phi.n},
        {"psi", detail::matrix_to_json(w.psi)},
        {"residual", w.residual},
        {"exact", w.exact},
        {"tol", tol},
    };

    if (doc.a && doc.phi1) {
        const ImageSingularity cls = classify_image(*doc.a, *doc.phi1);
        report["classification"] = singularity_name(cls);
        report["a"] = detail::complex_to_json(*doc.a);
    }

    if (w.exact) {
        const auto [pp, pm] = phi_pm(phi, w.psi);
        report["phi_plus"] = {detail::matrix_to_json(pp.c[0]), detail::matrix_to_json(pp.c[1])};
        report["phi_minus"] = {detail::matrix_to_json(pm.c[0]), detail::matrix_to_json(pm.c[1])};
        json samples = json::array();
        for (int j = 0; j < 5; ++j) {
            const double th = 2.0 * M_PI * j / 5 + 0.2;
            const Complex z(std::cos(th), std::sin(th));
            try {
                const SupportResult sup = support_points(pp, pm, z, 1e-8, kRankTol, seed + j);
                for (const auto& sp : sup.points)
                    samples.push_back({{"z", detail::complex_to_json(sp.point.z)},
                                       {"x", detail::complex_to_json(sp.point.x)},
                                       {"y", detail::complex_to_json(sp.point.y)},
                                       {"w", detail::complex_to_json(sp.point.w)},
                                       {"mult", sp.mult}});
            } catch (const std::exception&) {
                // non-commuting sample (inexact witness drift); skip the node
            }
        }
        report["support_samples"] = samples;
    }

    fs::create_directories(out);
    write_json(fs::path(out) / "report.json", report);
    std::cout << "residual " << w.residual << (w.exact ? " (exact fixed point)" : " (not a fixed point)")
              << "\n";
    return kExitOk;
}

int cmd_rank2(const std::string& input, std::optional<double> t_end, double dt,
              const std::string& out) {
    const InputDocument doc = load_input_document(input);
    if (doc.coeffs.size() != 4)
        throw input_error("coeffs: the parabolic rank-2 field needs 4 coefficient matrices");
    const MatrixPoly phi(doc.n, doc.coeffs);

    ModuliPoint pt;
    try {
        pt = moduli_coords(phi);
    } catch (const stability_error& e) {
        throw input_error(e.what());
    } catch (const chart_error& e) {
        throw input_error(e.what());
    }

    json report = {
        {"command", "rank2"},
        {"generator_scale", ModuliFlowReport::generator_scale},
        {"z0", detail::complex_to_json(pt.z0)},
        {"w0", detail::complex_to_json(pt.w0)},
        {"q", poly_to_json(pt.q)},
        {"vector_field_zero", vector_field_zero(pt)},
    };

    if (t_end) {
        NahmState s0;
        s0.form = FlowForm::parabolic;
        s0.block_split = doc.block_split ? doc.block_split : 1;
        s0.c = doc.coeffs;
        s0.validate();
        const Trajectory traj = integrate(s0, *t_end, dt);
        if (traj.blew_up) return kExitBlowUp;
        const ModuliFlowReport rep = moduli_flow_check(traj);
        report["flow_check"] = {
            {"z0_law", rep.z0_law},       {"w0_law", rep.w0_law},
            {"c0_law", rep.c0_law},       {"c1_law", rep.c1_law},
            {"z0_vs_w0", rep.z0_vs_w0},   {"q_drift", rep.q_drift},
            {"on_curve", rep.on_curve},   {"chart_ok", rep.chart_ok},
        };
        if (!rep.chart_ok) report["flow_check"]["chart_fail_time"] = rep.chart_fail_time;
    }

    fs::create_directories(out);
    write_json(fs::path(out) / "report.json", report);
    std::cout << "z0 = " << pt.z0 << ", w0 = " << pt.w0
              << (vector_field_zero(pt) ? " (vector field zero)" : "") << "\n";
    return kExitOk;
}

int cmd_ribbon(const std::string& input, std::optional<int> d, int grid, const std::string& traj_path,
               double tol, const std::string& out) {
    const InputDocument doc = load_input_document(input);
    if (doc.coeffs.size() < 3 || doc.coeffs.size() > 4)
        throw input_error("coeffs: expected 3 or 4 coefficient matrices");
    const MatrixPoly phi(doc.n, doc.coeffs);
    if (phi.n % 2 != 0) throw input_error("n: ribbon diagnostics need even rank");

    const auto rd = ribbon_data(phi, grid);
    if (!rd) {
        std::cerr << "characteristic polynomial is not a perfect square (reduced spectral curve)\n";
        return kExitNotRibbon;
    }
    const int m = rd->m();

    json report = {
        {"command", "ribbon"},
        {"m", m},
        {"p", bivariate_to_json(rd->p)},
        {"case", sheaf_case_name(rd->sheaf_case)},
    };

    if (rd->sheaf_case == SheafCase::GeneralizedLineBundle) {
        json pts = json::array();
        int total_order = 0;
        for (const auto& q : rd->divisor.points) {
            pts.push_back({{"z", detail::complex_to_json(q.z)},
                           {"lambda", detail::complex_to_json(q.lambda)},
                           {"mult", q.mult},
                           {"order", q.order}});
            total_order += q.order;
        }
        report["divisor"] = pts;
        report["divisor_order_total"] = total_order;
        report["unconverged"] = rd->divisor.unconverged.size();
        if (d) {
            report["d"] = *d;
            report["degree_consistent"] = degree_consistency(rd->divisor, m, *d);
        }
        if (m == 1) {
            try {
                report["kernel_degree"] = kernel_degree_rank2(phi, rd->p);
            } catch (const std::exception&) {
                // scalar nilpotent part: no kernel line to measure
            }
        }
        if (!traj_path.empty()) {
            const Trajectory traj = read_trajectory_csv(traj_path);
            const DivisorConservationReport rep = divisor_conservation(traj, rd->p, grid, tol);
            report["conservation"] = {
                {"initial_count", rep.initial_count},
                {"count_constant", rep.count_constant},
                {"max_drift", rep.max_drift},
                {"spectral_drift", rep.spectral_drift},
                {"count_change_times", rep.count_change_times},
            };
        }
    }

    fs::create_directories(out);
    write_json(fs::path(out) / "report.json", report);
    std::cout << "case " << sheaf_case_name(rd->sheaf_case) << "\n";
    return kExitOk;
}

int cmd_classify(const std::string& input, const std::string& out, unsigned seed) {
    const InputDocument doc = load_input_document(input);
    if (!doc.a || !doc.phi1) throw input_error("metadata: classify needs metadata.a and metadata.phi1");
    const Complex a = *doc.a;
    const Rank2Family fam{a, *doc.phi1};
    const ImageSingularity cls = classify_image(a, *doc.phi1);

    json report = {
        {"command", "classify"},
        {"a", detail::complex_to_json(a)},
        {"classification", singularity_name(cls)},
        {"residual", fixed_residual_phi(fam.psi(), fam.phi())},
    };

    // support points over the marked fibre z = -a
    try {
        const auto [pp, pm] = phi_pm(fam.phi(), fam.psi());
        const SupportResult sup = support_points(pp, pm, -a, 1e-8, kRankTol, seed);
        json pts = json::array();
        for (const auto& sp : sup.points)
            pts.push_back({{"x", detail::complex_to_json(sp.point.x)},
                           {"y", detail::complex_to_json(sp.point.y)},
                           {"w", detail::complex_to_json(sp.point.w)},
                           {"mult", sp.mult}});
        report["fibre_z"] = detail::complex_to_json(-a);
        report["fibre_points"] = pts;
    } catch (const std::exception& e) {
        report["fibre_error"] = e.what();
    }

    fs::create_directories(out);
    write_json(fs::path(out) / "report.json", report);
    std::cout << singularity_name(cls) << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"nahmlab: Nahm flows on co-Higgs data over the projective line"};
    app.require_subcommand(1);

    IntegrateArgs iargs;
    auto* integ = app.add_subcommand("integrate", "integrate a flow and write traj.csv + manifest.json");
    integ->add_option("--input", iargs.input, "input JSON document (or array of documents)")->required();
    integ->add_option("--t-end", iargs.t_end, "final time")->required();
    integ->add_option("--dt", iargs.dt, "step size")->required();
    integ->add_option("--form", iargs.form, "flow form override: symmetric|asymmetric|parabolic|t");
    integ->add_option("--out", iargs.out, "output directory");
    integ->add_option("--seed", iargs.seed, "seed recorded in the manifest");
    integ->add_option("--jobs", iargs.jobs, "parallel workers for input arrays");

    std::string inv_input, inv_out = ".";
    double inv_tol = 1e-6;
    auto* inv = app.add_subcommand("invariants", "spectral conservation report for a trajectory");
    inv->add_option("--input", inv_input, "trajectory CSV")->required();
    inv->add_option("--tol", inv_tol, "drift tolerance");
    inv->add_option("--out", inv_out, "output directory");

    std::string fp_input, fp_out = ".";
    bool fp_family = false;
    double fp_tol = kFixTol;
    unsigned fp_seed = 20260808u;
    auto* fp = app.add_subcommand("fixed-point", "solve the stationarity system for psi");
    fp->add_option("--input", fp_input, "input JSON document")->required();
    fp->add_flag("--family", fp_family, "build the rank-2 family from metadata.a and metadata.phi1");
    fp->add_option("--tol", fp_tol, "exactness threshold");
    fp->add_option("--out", fp_out, "output directory");
    fp->add_option("--seed", fp_seed, "seed for the pencil checks");

    std::string r2_input, r2_out = ".";
    double r2_tend = -1.0, r2_dt = 1e-3;
    auto* r2 = app.add_subcommand("rank2", "rank-2 moduli coordinates and flow-law audit");
    r2->add_option("--input", r2_input, "parabolic rank-2 input JSON")->required();
    r2->add_option("--t-end", r2_tend, "integrate to this time and audit the motion laws");
    r2->add_option("--dt", r2_dt, "step size");
    r2->add_option("--out", r2_out, "output directory");

    std::string rb_input, rb_traj, rb_out = ".";
    int rb_grid = 256;
    int rb_d = std::numeric_limits<int>::min();
    double rb_tol = 1e-6;
    auto* rb = app.add_subcommand("ribbon", "ribbon detection, case split and divisor diagnostics");
    rb->add_option("--input", rb_input, "input JSON document")->required();
    rb->add_option("--d", rb_d, "declared extension degree for the degree check");
    rb->add_option("--grid", rb_grid, "scan samples per circle");
    rb->add_option("--traj", rb_traj, "trajectory CSV for the conservation audit");
    rb->add_option("--tol", rb_tol, "spectral conservation tolerance for --traj");
    rb->add_option("--out", rb_out, "output directory");

    std::string cl_input, cl_out = ".";
    unsigned cl_seed = 20260808u;
    auto* cl = app.add_subcommand("classify", "singularity type of the stationary rank-2 family");
    cl->add_option("--input", cl_input, "input JSON with metadata.a and metadata.phi1")->required();
    cl->add_option("--out", cl_out, "output directory");
    cl->add_option("--seed", cl_seed, "seed for the pencil checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (integ->parsed()) return cmd_integrate(iargs);
        if (inv->parsed()) return cmd_invariants(inv_input, inv_tol, inv_out);
        if (fp->parsed()) return cmd_fixed_point(fp_input, fp_family, fp_tol, fp_out, fp_seed);
        if (r2->parsed())
            return cmd_rank2(r2_input,
                             r2_tend > 0 ? std::optional<double>(r2_tend) : std::nullopt, r2_dt,
                             r2_out);
        if (rb->parsed())
            return cmd_ribbon(rb_input,
                              rb_d == std::numeric_limits<int>::min() ? std::nullopt
                                                                      : std::optional<int>(rb_d),
                              rb_grid, rb_traj, rb_tol, rb_out);
        if (cl->parsed()) return cmd_classify(cl_input, cl_out, cl_seed);
    } catch (const input_error& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::invalid_argument& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitOk;
}
