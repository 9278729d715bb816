#include "qtraj/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "qtraj/freeze_stats.hpp"
#include "qtraj/liouvillian.hpp"

#include <CLI11.hpp>

namespace qtraj {

using nlohmann::json;

namespace {

json unraveling_to_json(const UnravelingConfig& u) {
    return json{{"dt", u.dt},
                {"t_max", u.t_max},
                {"record_stride", u.record_stride},
                {"seed", u.seed},
                {"freeze_epsilon", u.freeze_epsilon},
                {"grace_fraction", u.grace_fraction},
                {"early_stop", u.early_stop},
                {"track_products", u.track_products},
                {"rescale_stride", u.rescale_stride},
                {"check_stride", u.check_stride},
                {"store_final_state", u.store_final_state},
                {"nonfreeze_band_log", u.nonfreeze_band_log}};
}

UnravelingConfig unraveling_from_json(const json& j) {
    UnravelingConfig u;
    u.dt = j.value("dt", u.dt);
    u.t_max = j.value("t_max", u.t_max);
    u.record_stride = j.value("record_stride", u.record_stride);
    u.seed = j.value("seed", u.seed);
    u.freeze_epsilon = j.value("freeze_epsilon", u.freeze_epsilon);
    u.grace_fraction = j.value("grace_fraction", u.grace_fraction);
    u.early_stop = j.value("early_stop", u.early_stop);
    u.track_products = j.value("track_products", u.track_products);
    u.rescale_stride = j.value("rescale_stride", u.rescale_stride);
    u.check_stride = j.value("check_stride", u.check_stride);
    u.store_final_state = j.value("store_final_state", u.store_final_state);
    u.nonfreeze_band_log = j.value("nonfreeze_band_log", u.nonfreeze_band_log);
    return u;
}

std::pair<int, int> pair_from_json(const json& j, std::pair<int, int> fallback) {
    if (!j.is_array() || j.size() != 2) return fallback;
    return {j[0].get<int>(), j[1].get<int>()};
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
    RunConfig c;
    if (j.contains("model")) c.model = j.at("model");
    if (j.contains("unraveling")) c.unraveling = unraveling_from_json(j.at("unraveling"));
    c.experiment = j.value("experiment", c.experiment);
    c.out_dir = j.value("out", c.out_dir);
    c.n_traj = j.value("n_traj", c.n_traj);
    c.threads = j.value("threads", c.threads);
    if (j.contains("emission")) {
        const json& e = j.at("emission");
        c.emission.histogram_bins = e.value("histogram_bins", 0);
        if (e.contains("snapshot_times"))
            c.emission.snapshot_times = e.at("snapshot_times").get<std::vector<double>>();
    }
    if (j.contains("sweep")) {
        const json& s = j.at("sweep");
        if (s.contains("gammas")) c.sweep.gammas = s.at("gammas").get<std::vector<double>>();
        c.sweep.pair = pair_from_json(s.value("pair", json()), c.sweep.pair);
    }
    c.pair = pair_from_json(j.value("pair", json()), c.pair);
    return c;
}

json run_config_to_json(const RunConfig& c) {
    json j{{"model", c.model},
           {"unraveling", unraveling_to_json(c.unraveling)},
           {"experiment", c.experiment},
           {"out", c.out_dir},
           {"n_traj", c.n_traj},
           {"threads", c.threads},
           {"emission",
            {{"histogram_bins", c.emission.histogram_bins},
             {"snapshot_times", c.emission.snapshot_times}}},
           {"sweep",
            {{"gammas", c.sweep.gammas},
             {"pair", {c.sweep.pair.first, c.sweep.pair.second}}}},
           {"pair", {c.pair.first, c.pair.second}}};
    return j;
}

std::string content_hash(const std::string& content) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : content) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17e", x);
    return buf;
}

std::string write_csv_artifact(const std::string& path, const json& config,
                               const std::string& content) {
    std::string hash = content_hash(content);
    std::ofstream f(path);
    if (!f) throw ValidationError("cannot open output file: " + path);
    f << "# config: " << config.dump() << "\n";
    f << "# content-hash: fnv1a:" << hash << "\n";
    f << content;
    return hash;
}

std::string write_json_artifact(const std::string& path, const json& config,
                                const json& payload) {
    std::string hash = content_hash(payload.dump());
    json doc = payload;
    doc["config"] = config;
    doc["content_hash"] = "fnv1a:" + hash;
    std::ofstream f(path);
    if (!f) throw ValidationError("cannot open output file: " + path);
    f << doc.dump(2) << "\n";
    return hash;
}

namespace {

std::string out_path(const RunConfig& c, const std::string& file) {
    std::filesystem::create_directories(c.out_dir);
    return (std::filesystem::path(c.out_dir) / file).string();
}

BlockedModel build_model(const RunConfig& c) {
    require(!c.model.is_null(), "run config has no model");
    return build_blocked(model_from_json(c.model));
}

json pairs_to_json(const std::vector<std::pair<int, int>>& ps) {
    json arr = json::array();
    for (const auto& [a, b] : ps) arr.push_back({a, b});
    return arr;
}

json freeze_report_to_json(const FreezeReport& fr) {
    json j{{"frozen", fr.frozen},
           {"destination", fr.destination},
           {"freeze_time", fr.freeze_time},
           {"non_freezing_pairs", pairs_to_json(fr.non_freezing_pairs)}};
    j["final_p"] = json::array();
    for (Eigen::Index a = 0; a < fr.final_p.size(); ++a) j["final_p"].push_back(fr.final_p[a]);
    return j;
}

}  // namespace

void cmd_trajectory(const RunConfig& c) {
    BlockedModel m = build_model(c);
    UnravelingConfig cfg = c.unraveling;
    cfg.track_products = true;
    cfg.validate();
    TrajectoryRecord rec = run_trajectory(m, cfg);
    if (rec.failed) throw NumericalError("trajectory failed: " + rec.error);

    const json cj = run_config_to_json(c);
    const int ns = m.n_subspaces();

    std::ostringstream w;
    w << "t";
    for (int a = 0; a < ns; ++a) w << ",p_" << a;
    for (int a = 0; a < ns; ++a) w << ",log_w_" << a;
    w << "\n";
    for (Eigen::Index i = 0; i < rec.times.size(); ++i) {
        w << format_double(rec.times[i]);
        for (int a = 0; a < ns; ++a) w << "," << format_double(rec.p(i, a));
        for (int a = 0; a < ns; ++a) w << "," << format_double(rec.log_w(i, a));
        w << "\n";
    }
    write_csv_artifact(out_path(c, "weights.csv"), cj, w.str());

    std::ostringstream sv;
    sv << "t";
    for (int a = 0; a < ns; ++a) sv << ",log_sv1_" << a;
    sv << "\n";
    for (const auto& snap : rec.singulars) {
        sv << format_double(snap.t);
        for (int a = 0; a < ns; ++a) {
            double v = snap.log_sv[static_cast<std::size_t>(a)].size() > 0
                           ? snap.log_sv[static_cast<std::size_t>(a)][0]
                           : neg_inf();
            sv << "," << format_double(v);
        }
        sv << "\n";
    }
    write_csv_artifact(out_path(c, "singulars.csv"), cj, sv.str());

    json report = freeze_report_to_json(rec.freeze);
    report["seed"] = rec.seed;
    report["n_steps"] = rec.n_steps;
    report["n_jumps"] = rec.jump_log.size();
    report["cutoff_leakage_max"] = rec.cutoff_leakage_max;
    write_json_artifact(out_path(c, "freeze_report.json"), cj, report);
}

void cmd_ensemble(const RunConfig& c) {
    BlockedModel m = build_model(c);
    UnravelingConfig cfg = c.unraveling;
    cfg.validate();
    EnsembleResult ens = run_ensemble(m, cfg, c.n_traj, c.threads);

    RealVector snaps(static_cast<Eigen::Index>(c.emission.snapshot_times.size()));
    for (std::size_t i = 0; i < c.emission.snapshot_times.size(); ++i)
        snaps[static_cast<Eigen::Index>(i)] = c.emission.snapshot_times[i];
    EnsembleFreezeStats st = ensemble_stats(ens.records, c.emission.histogram_bins, snaps);

    const json cj = run_config_to_json(c);
    const int ns = m.n_subspaces();

    std::ostringstream h;
    h << "bin_left,bin_right,pdf,cdf\n";
    for (Eigen::Index b = 0; b < st.pdf.size(); ++b)
        h << format_double(st.bin_left[b]) << "," << format_double(st.bin_right[b]) << ","
          << format_double(st.pdf[b]) << "," << format_double(st.cdf[b]) << "\n";
    write_csv_artifact(out_path(c, "freeze_hist.csv"), cj, h.str());

    std::ostringstream d;
    d << "alpha,count,fraction,binomial_stderr\n";
    const double n = static_cast<double>(std::max<long>(1, st.frozen_count));
    for (int a = 0; a < ns; ++a) {
        double frac = static_cast<double>(st.destination_counts[static_cast<std::size_t>(a)]) / n;
        double se = std::sqrt(std::max(0.0, frac * (1.0 - frac) / n));
        d << a << "," << st.destination_counts[static_cast<std::size_t>(a)] << ","
          << format_double(frac) << "," << format_double(se) << "\n";
    }
    write_csv_artifact(out_path(c, "destinations.csv"), cj, d.str());

    std::ostringstream co;
    co << "t,alpha,alpha_prime,value\n";
    for (std::size_t si = 0; si < st.coherence.size(); ++si)
        for (int a = 0; a < ns; ++a)
            for (int ap = 0; ap < ns; ++ap)
                co << format_double(st.snapshot_times[static_cast<Eigen::Index>(si)]) << ","
                   << a << "," << ap << "," << format_double(st.coherence[si](a, ap)) << "\n";
    write_csv_artifact(out_path(c, "coherence_matrix.csv"), cj, co.str());

    json summary{{"n_traj", c.n_traj},
                 {"frozen_count", st.frozen_count},
                 {"unfrozen_count", st.unfrozen_count},
                 {"mean_freeze_time", st.mean_freeze_time},
                 {"stderr_freeze_time", st.stderr_freeze_time},
                 {"failures", ens.failures}};
    summary["destination_fractions"] = json::array();
    for (int a = 0; a < ns; ++a)
        summary["destination_fractions"].push_back(
            static_cast<double>(st.destination_counts[static_cast<std::size_t>(a)]) / n);
    write_json_artifact(out_path(c, "summary.json"), cj, summary);
}

void cmd_sweep_gamma(const RunConfig& c) {
    require(!c.sweep.gammas.empty(), "sweep-gamma: config needs sweep.gammas");
    const json model_json = c.model;
    auto family = [&model_json](double gamma) {
        json j = model_json;
        j["params"]["gamma"] = gamma;
        return model_from_json(j);
    };
    UnravelingConfig cfg = c.unraveling;
    cfg.validate();
    GapSweepResult res = freeze_time_vs_gap(family, c.sweep.gammas, c.sweep.pair,
                                            c.n_traj, cfg, c.threads);

    const json cj = run_config_to_json(c);

    std::ostringstream gg;
    gg << "gamma,gap\n";
    for (const auto& r : res.rows)
        gg << format_double(r.gamma) << "," << format_double(r.gap) << "\n";
    write_csv_artifact(out_path(c, "gap_vs_gamma.csv"), cj, gg.str());

    std::ostringstream ft;
    ft << "gamma,mean_freeze_time,stderr,frozen,total,divergent\n";
    for (const auto& r : res.rows)
        ft << format_double(r.gamma) << "," << format_double(r.mean_freeze_time) << ","
           << format_double(r.stderr_freeze_time) << "," << r.frozen << "," << r.total
           << "," << (r.divergent ? 1 : 0) << "\n";
    write_csv_artifact(out_path(c, "freezetime_vs_gamma.csv"), cj, ft.str());

    json fit{{"valid", res.fit_valid}};
    if (res.fit_valid) {
        fit["slope"] = res.fitted_slope;
        fit["constant"] = res.fitted_constant;
        fit["fit_range_gamma"] = {c.sweep.gammas.front(), c.sweep.gammas.back()};
    } else {
        fit["reason"] = "fewer than two non-divergent grid points; fit not applicable";
    }
    write_json_artifact(out_path(c, "fit.json"), cj, fit);
}

void cmd_spectrum(const RunConfig& c) {
    BlockedModel m = build_model(c);
    const json cj = run_config_to_json(c);

    std::vector<std::pair<int, int>> pairs;
    if (c.pair.first >= 0 && c.pair.second >= 0) {
        pairs.push_back(c.pair);
    } else {
        for (int a = 0; a < m.n_subspaces(); ++a)
            for (int ap = a; ap < m.n_subspaces(); ++ap) pairs.push_back({a, ap});
    }

    std::ostringstream sp;
    sp << "alpha,alpha_prime,re_lambda,im_lambda\n";
    json gaps = json::array();
    for (const auto& p : pairs) {
        SectorSpectrum s = sector_spectrum(m, p);
        for (Eigen::Index i = 0; i < s.eigenvalues.size(); ++i)
            sp << p.first << "," << p.second << "," << format_double(s.eigenvalues[i].real())
               << "," << format_double(s.eigenvalues[i].imag()) << "\n";
        gaps.push_back({{"pair", {p.first, p.second}},
                        {"gap", s.gap},
                        {"n_traceless_nondecaying", s.traceless_nondecaying.size()}});
    }
    write_csv_artifact(out_path(c, "spectrum.csv"), cj, sp.str());
    write_json_artifact(out_path(c, "summary.json"), cj, json{{"sectors", gaps}});
}

void cmd_steady_states(const RunConfig& c) {
    BlockedModel m = build_model(c);
    const json cj = run_config_to_json(c);
    std::vector<SteadyState> sts = steady_states(m);

    std::ostringstream rho;
    rho << "state,alpha,row,col,re,im\n";
    json summary = json::array();
    for (std::size_t k = 0; k < sts.size(); ++k) {
        const auto& s = sts[k];
        for (Eigen::Index i = 0; i < s.rho.rows(); ++i)
            for (Eigen::Index j = 0; j < s.rho.cols(); ++j)
                rho << k << "," << s.alpha << "," << i << "," << j << ","
                    << format_double(s.rho(i, j).real()) << ","
                    << format_double(s.rho(i, j).imag()) << "\n";
        summary.push_back({{"alpha", s.alpha},
                           {"residual", s.residual},
                           {"degeneracy", s.degeneracy},
                           {"min_eigenvalue", s.min_eigenvalue},
                           {"trace", s.rho.trace().real()}});
    }
    write_csv_artifact(out_path(c, "steady_states.csv"), cj, rho.str());
    write_json_artifact(out_path(c, "summary.json"), cj,
                        json{{"count", sts.size()}, {"states", summary}});
}

void cmd_detect_traceless(const RunConfig& c) {
    BlockedModel m = build_model(c);
    // override init: spread across every subspace so each pair is observable
    m.init_subspaces.clear();
    for (int a = 0; a < m.n_subspaces(); ++a) m.init_subspaces.push_back(a);
    m.init_vector.reset();

    UnravelingConfig cfg = c.unraveling;
    cfg.early_stop = false;
    cfg.validate();

    using clock = std::chrono::steady_clock;
    auto t0 = clock::now();
    TrajectoryRecord rec = run_trajectory(m, cfg);
    double heuristic_seconds = std::chrono::duration<double>(clock::now() - t0).count();
    if (rec.failed) throw NumericalError("heuristic trajectory failed: " + rec.error);

    // spectral oracle, unless a sector is too large to diagonalize sensibly
    long max_sector = 0;
    for (int a = 0; a < m.n_subspaces(); ++a)
        for (int ap = a + 1; ap < m.n_subspaces(); ++ap)
            max_sector = std::max<long>(max_sector,
                                        static_cast<long>(m.dim_of(a)) * m.dim_of(ap));
    bool oracle_run = max_sector <= 4096;
    std::vector<TracelessMode> spectral;
    double spectral_seconds = 0.0;
    if (oracle_run) {
        auto t1 = clock::now();
        spectral = detect_traceless_modes(m);
        spectral_seconds = std::chrono::duration<double>(clock::now() - t1).count();
    }
    std::vector<std::pair<int, int>> spectral_pairs;
    for (const auto& tm : spectral) spectral_pairs.push_back(tm.pair);

    // classify each heuristic pair: similar subspaces vs traceless mode
    BlockOperator hb;
    hb.structure = m.structure;
    hb.blocks = m.h_blocks;
    std::vector<BlockOperator> jbs;
    for (std::size_t j = 0; j < m.jump_blocks.size(); ++j) {
        BlockOperator b;
        b.structure = m.structure;
        b.blocks = m.jump_blocks[j];
        jbs.push_back(std::move(b));
    }
    json classes = json::array();
    for (const auto& p : rec.freeze.non_freezing_pairs) {
        std::string cls = "unclassified";
        SimilarityVerdict v = check_similar(hb, jbs, p, 1e-8);
        bool in_spectral = std::find(spectral_pairs.begin(), spectral_pairs.end(), p) !=
                           spectral_pairs.end();
        if (v.similar) cls = "similar-subspace";
        else if (in_spectral) cls = "traceless-mode";
        else if (!oracle_run) cls = "oracle-skipped";
        classes.push_back({{"pair", {p.first, p.second}}, {"class", cls}});
    }

    bool agree = true;
    if (oracle_run) {
        auto heur = rec.freeze.non_freezing_pairs;
        std::sort(heur.begin(), heur.end());
        std::sort(spectral_pairs.begin(), spectral_pairs.end());
        // similar-subspace pairs are expected in the heuristic list only
        std::vector<std::pair<int, int>> heur_traceless;
        for (const auto& p : heur) {
            SimilarityVerdict v = check_similar(hb, jbs, p, 1e-8);
            if (!v.similar) heur_traceless.push_back(p);
        }
        agree = heur_traceless == spectral_pairs;
    }

    json report{{"heuristic",
                 {{"frozen", rec.freeze.frozen},
                  {"destination", rec.freeze.destination},
                  {"non_freezing_pairs", pairs_to_json(rec.freeze.non_freezing_pairs)},
                  {"seconds", heuristic_seconds}}},
                {"spectral",
                 {{"run", oracle_run},
                  {"pairs", pairs_to_json(spectral_pairs)},
                  {"seconds", spectral_seconds}}},
                {"classification", classes},
                {"agreement", agree}};
    if (!oracle_run)
        report["spectral"]["reason"] =
            "largest sector dimension " + std::to_string(max_sector) +
            " exceeds the dense-diagonalization budget; heuristic stands alone";
    write_json_artifact(out_path(c, "traceless_report.json"), run_config_to_json(c), report);
}

void cmd_validate_model(const RunConfig& c) {
    BlockedModel m = build_model(c);
    ModelSpec spec = model_from_json(c.model);

    json dims = json::array();
    for (int a = 0; a < m.n_subspaces(); ++a) dims.push_back(m.dim_of(a));

    json report{{"name", spec.name},
                {"dim", m.dim},
                {"n_subspaces", m.n_subspaces()},
                {"subspace_dims", dims},
                {"n_jumps", m.jump_blocks.size()}};
    if (spec.A) {
        bool ok = verify_strong_symmetry(
            spec.H, [&] {
                std::vector<Matrix> ls;
                for (const auto& [l, g] : spec.jumps) ls.push_back(l);
                return ls;
            }(), *spec.A, 1e-10);
        report["strong_symmetry_verified"] = ok;
    }
    write_json_artifact(out_path(c, "model_report.json"), run_config_to_json(c), report);
}

int run_command(const RunConfig& c) {
    try {
        if (c.experiment == "trajectory") cmd_trajectory(c);
        else if (c.experiment == "ensemble") cmd_ensemble(c);
        else if (c.experiment == "sweep-gamma") cmd_sweep_gamma(c);
        else if (c.experiment == "spectrum") cmd_spectrum(c);
        else if (c.experiment == "steady-states") cmd_steady_states(c);
        else if (c.experiment == "detect-traceless") cmd_detect_traceless(c);
        else if (c.experiment == "validate-model") cmd_validate_model(c);
        else throw StructuralError("unknown experiment: " + c.experiment);
        return 0;
    } catch (const InternalConsistencyError& e) {
        std::cerr << json{{"error", e.what()}, {"type", "internal-consistency"}}.dump()
                  << "\n";
        return 4;
    } catch (const NumericalError& e) {
        std::cerr << json{{"error", e.what()}, {"type", "numerical"}}.dump() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", e.what()}, {"type", "config"}}.dump() << "\n";
        return 2;
    }
}

int cli_main(int argc, char** argv) {
    CLI::App app{"Monte Carlo trajectory unraveling for open systems with strong symmetries"};
    app.fallthrough();

    std::string config_path, out_dir;
    std::uint64_t seed = 0;
    int n_traj = -1, threads = -1;
    app.add_option("--config", config_path, "run configuration JSON");
    app.add_option("--seed", seed, "override unraveling seed");
    app.add_option("--out", out_dir, "override output directory");
    app.add_option("--n-traj", n_traj, "override trajectory count");
    app.add_option("--threads", threads, "override worker count");

    const std::vector<std::string> experiments = {
        "trajectory", "ensemble", "sweep-gamma", "spectrum",
        "steady-states", "detect-traceless", "validate-model"};
    for (const auto& e : experiments)
        app.add_subcommand(e, "run the " + e + " experiment");
    CLI::App* models_cmd = app.add_subcommand("models", "list the built-in model families");
    models_cmd->add_subcommand("list", "list the built-in model families");

    app.require_subcommand(0, 1);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    if (models_cmd->parsed()) {
        for (const auto& name : known_model_names()) std::cout << name << "\n";
        return 0;
    }

    RunConfig cfg;
    try {
        if (!config_path.empty()) {
            std::ifstream f(config_path);
            if (!f) throw ValidationError("cannot read config file: " + config_path);
            json j;
            f >> j;
            cfg = run_config_from_json(j);
        }
        // flags override config fields
        for (const auto& e : experiments)
            if (app.get_subcommand(e)->parsed()) cfg.experiment = e;
        if (app.count("--seed")) cfg.unraveling.seed = seed;
        if (app.count("--out")) cfg.out_dir = out_dir;
        if (app.count("--n-traj")) cfg.n_traj = n_traj;
        if (app.count("--threads")) cfg.threads = threads;
        if (cfg.model.is_null())
            throw ValidationError("no model specified; provide --config with a model recipe");
    } catch (const std::exception& e) {
        std::cerr << json{{"error", e.what()}, {"type", "config"}}.dump() << "\n";
        return 2;
    }
    return run_command(cfg);
}

}  // namespace qtraj
