#include "oarl/cli/run.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>

#include "oarl/common.hpp"
#include "oarl/data/collect.hpp"
#include "oarl/data/dataset.hpp"
#include "oarl/learner/cql.hpp"
#include "oarl/rng.hpp"
#include "oarl/sampling/sampler.hpp"

namespace fs = std::filesystem;

namespace oarl::cli {
namespace {

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError(IoErrorKind::WriteFailed, "cannot create directory " + dir.string() + ": " + ec.message());
}

std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(IoErrorKind::ReadFailed, "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Loads the configured dataset, applies the optional episode subsample, and
// checks that its shape matches the configured environment.
data::TransitionDataset load_training_dataset(const ExperimentConfig& cfg) {
    data::TransitionDataset ds = data::load_dataset(cfg.dataset.path);
    if (cfg.dataset.subsample_fraction < 1.0) {
        ds = data::subsample(ds, cfg.dataset.subsample_fraction, cfg.dataset.subsample_seed);
    }
    if (ds.meta.env_kind != cfg.env_name()) {
        throw ConfigError("dataset " + cfg.dataset.path + " was collected in '" + ds.meta.env_kind +
                          "' but the config selects '" + cfg.env_name() + "'");
    }
    if (static_cast<int>(ds.meta.obs_dim) != cfg.env_obs_dim() ||
        static_cast<int>(ds.meta.action_count) != cfg.env_action_count()) {
        throw ConfigError("dataset shape (" + std::to_string(ds.meta.obs_dim) + " obs, " +
                          std::to_string(ds.meta.action_count) + " actions) does not match the env (" +
                          std::to_string(cfg.env_obs_dim()) + " obs, " +
                          std::to_string(cfg.env_action_count()) + " actions)");
    }
    if (ds.size() == 0) throw ConfigError("dataset " + cfg.dataset.path + " holds no transitions");
    return ds;
}

void check_checkpoint_shape(const learner::EnsembleQ& ens, const ExperimentConfig& cfg,
                            const std::string& path) {
    if (ens.obs_dim != cfg.env_obs_dim() || ens.action_count != cfg.env_action_count()) {
        throw ConfigError("checkpoint " + path + " expects " + std::to_string(ens.obs_dim) +
                          " observation features and " + std::to_string(ens.action_count) +
                          " actions; the configured env has " + std::to_string(cfg.env_obs_dim()) +
                          " and " + std::to_string(cfg.env_action_count()));
    }
}

eval::EvalReport evaluate_suite(const learner::EnsembleQ& ens, const ExperimentConfig& cfg) {
    if (cfg.env_kind == EnvKind::Traffic) return eval::evaluate_traffic_suite(ens, cfg.traffic);
    return eval::evaluate_maze_suite(ens, cfg.maze, cfg.eval.episodes_per_case, cfg.eval.seed);
}

struct SeedRun {
    TrainSeedOutcome outcome;
    std::vector<eval::EvalReport> reports;
};

SeedRun train_one_seed(const ExperimentConfig& cfg, const data::TransitionDataset& ds,
                       const std::optional<learner::EnsembleQ>& scorer_init, uint64_t seed,
                       const fs::path& seed_dir, std::ostream& log) {
    SeedRun run;
    run.outcome.seed = seed;
    run.outcome.curve.seed = seed;
    ensure_dir(seed_dir);

    learner::EnsembleQ ens = learner::make_ensemble(cfg.env_obs_dim(), cfg.env_action_count(),
                                                    cfg.learner, derive_seed(seed, "ensemble"));
    std::optional<learner::EnsembleQ> scorer = scorer_init;  // fresh copy per seed
    Rng rng(derive_seed(seed, "sampler"));
    sampling::ScoreTable table;
    sampling::SumTree tree;
    if (cfg.sampler.mode == sampling::SamplerMode::BatchPriority) {
        tree = sampling::SumTree(ds.size());
    }

    const uint64_t eval_interval = cfg.eval.steps_per_epoch / cfg.eval.evals_per_epoch;
    const auto eval_now = [&](uint64_t epoch) {
        eval::EvalReport r = evaluate_suite(ens, cfg);
        r.epoch = static_cast<int>(epoch);
        r.gradient_step = ens.gradient_steps;
        r.seed = seed;
        run.reports.push_back(r);
        run.outcome.curve.points.push_back({r.gradient_step, r.suite_mean});
    };

    try {
        for (uint64_t epoch = 0; epoch < cfg.eval.epochs; ++epoch) {
            for (uint64_t k = 0; k < cfg.eval.steps_per_epoch; ++k) {
                const sampling::AcquisitionKind kind = sampling::effective_sampler(
                    ens.gradient_steps, static_cast<int>(epoch), cfg.sampler);
                const learner::EnsembleQ& scoring = scorer ? *scorer : ens;

                std::vector<uint64_t> idx;
                if (kind == sampling::AcquisitionKind::Uniform) {
                    idx.resize(cfg.learner.batch_size);
                    for (uint64_t& i : idx) i = rng.uniform_int(ds.size());
                } else if (cfg.sampler.mode == sampling::SamplerMode::DatasetRecompute) {
                    sampling::maybe_rescore(table, scoring, ds, ens.gradient_steps, cfg.sampler,
                                            cfg.learner.gamma);
                    idx = sampling::normalize_and_sample(table, cfg.learner.batch_size, rng);
                } else {
                    idx = sampling::priority_sample(tree, cfg.learner.batch_size, rng);
                }

                const data::Batch batch = data::gather(ds, idx);
                learner::train_step(ens, batch, cfg.learner);
                if (scorer) learner::train_step(*scorer, batch, cfg.learner);

                if (kind != sampling::AcquisitionKind::Uniform &&
                    cfg.sampler.mode == sampling::SamplerMode::BatchPriority) {
                    const std::vector<double> fresh =
                        sampling::score_batch(scoring, batch, kind, cfg.learner.gamma);
                    sampling::priority_update(tree, idx, fresh, cfg.sampler);
                }

                if (ens.gradient_steps % eval_interval == 0) eval_now(epoch);
            }
            log << "[train] seed " << seed << " epoch " << epoch << ": step " << ens.gradient_steps
                << ", suite reward " << run.reports.back().suite_mean << "\n";
        }

        const fs::path ckpt = seed_dir / "checkpoint.bin";
        learner::save_checkpoint(ens, ckpt.string());
        run.outcome.checkpoint_path = ckpt.string();
        if (scorer) learner::save_checkpoint(*scorer, (seed_dir / "scorer.bin").string());
    } catch (const DivergenceError& e) {
        run.outcome.diverged = true;
        run.outcome.diagnostic = e.what();
        std::ofstream marker(seed_dir / "DIVERGED");
        marker << "seed " << seed << " aborted at gradient step " << ens.gradient_steps << ": "
               << e.what() << "\n";
        log << "[train] seed " << seed << " DIVERGED at step " << ens.gradient_steps << ": "
            << e.what() << "\n";
    }

    eval::write_curves_csv((seed_dir / "curve.csv").string(), run.reports);
    return run;
}

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

// Reads the suite rows of one training run's curve files, skipping seeds
// that recorded a divergence marker.
std::vector<eval::RewardCurve> read_run_curves(const std::string& run_dir) {
    const fs::path root(run_dir);
    if (!fs::is_directory(root)) {
        throw IoError(IoErrorKind::ReadFailed, "run directory not found: " + run_dir);
    }
    std::vector<fs::path> seed_dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory() && entry.path().filename().string().rfind("seed-", 0) == 0) {
            seed_dirs.push_back(entry.path());
        }
    }
    std::sort(seed_dirs.begin(), seed_dirs.end());

    std::vector<eval::RewardCurve> curves;
    for (const fs::path& dir : seed_dirs) {
        if (fs::exists(dir / "DIVERGED")) continue;
        const fs::path csv = dir / "curve.csv";
        if (!fs::exists(csv)) continue;
        std::ifstream in(csv);
        if (!in) throw IoError(IoErrorKind::ReadFailed, "cannot open " + csv.string());
        std::string line;
        if (!std::getline(in, line) || line != "seed,epoch,gradient_step,scenario,reward") {
            throw IoError(IoErrorKind::ReadFailed, csv.string() + " does not carry the curve schema");
        }
        eval::RewardCurve curve;
        bool have_seed = false;
        size_t number = 1;
        while (std::getline(in, line)) {
            ++number;
            if (line.empty()) continue;
            const std::vector<std::string> fields = split_csv_row(line);
            if (fields.size() != 5) {
                throw IoError(IoErrorKind::ReadFailed,
                              csv.string() + " line " + std::to_string(number) + ": expected 5 fields");
            }
            if (fields[3] != "suite") continue;
            try {
                if (!have_seed) {
                    curve.seed = std::stoull(fields[0]);
                    have_seed = true;
                }
                curve.points.push_back({std::stoull(fields[2]), std::stod(fields[4])});
            } catch (const std::logic_error&) {
                throw IoError(IoErrorKind::ReadFailed,
                              csv.string() + " line " + std::to_string(number) + ": malformed row");
            }
        }
        if (!curve.points.empty()) {
            curve.validate();
            curves.push_back(std::move(curve));
        }
    }
    return curves;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '&') out += "&amp;";
        else if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else out += c;
    }
    return out;
}

std::string tick_label(double v) {
    std::ostringstream out;
    out << std::setprecision(6) << v;
    return out.str();
}

void write_compare_svg(const std::string& path, const std::vector<RunComparison>& runs) {
    static const char* kPalette[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a",
                                     "#66a61e", "#e6ab02", "#a6761d", "#666666"};
    constexpr double kW = 880, kH = 520, kML = 70, kMT = 30, kMB = 50, kMR = 190;
    const double pw = kW - kML - kMR, ph = kH - kMT - kMB;

    double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
    bool first = true;
    for (const RunComparison& run : runs) {
        for (const eval::AggregatePoint& p : run.aggregate) {
            const double x = static_cast<double>(p.gradient_step);
            if (first) {
                xmin = xmax = x;
                ymin = p.q25;
                ymax = p.q75;
                first = false;
            } else {
                xmin = std::min(xmin, x);
                xmax = std::max(xmax, x);
                ymin = std::min(ymin, p.q25);
                ymax = std::max(ymax, p.q75);
            }
            ymin = std::min(ymin, p.iqm_reward);
            ymax = std::max(ymax, p.iqm_reward);
        }
    }
    if (first) throw ContractError("nothing to plot");
    if (xmax == xmin) xmax = xmin + 1.0;
    const double ypad = (ymax == ymin) ? 1.0 : 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    const auto sx = [&](double step) { return kML + (step - xmin) / (xmax - xmin) * pw; };
    const auto sy = [&](double v) { return kMT + ph - (v - ymin) / (ymax - ymin) * ph; };

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(IoErrorKind::WriteFailed, "cannot open " + path);
    out << std::fixed << std::setprecision(1);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << kW << " " << kH
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out << "<rect width=\"" << kW << "\" height=\"" << kH << "\" fill=\"white\"/>\n";

    for (int t = 0; t <= 4; ++t) {
        const double fx = xmin + (xmax - xmin) * t / 4.0;
        const double fy = ymin + (ymax - ymin) * t / 4.0;
        out << "<line x1=\"" << sx(fx) << "\" y1=\"" << kMT << "\" x2=\"" << sx(fx) << "\" y2=\""
            << kMT + ph << "\" stroke=\"#dddddd\"/>\n";
        out << "<line x1=\"" << kML << "\" y1=\"" << sy(fy) << "\" x2=\"" << kML + pw << "\" y2=\""
            << sy(fy) << "\" stroke=\"#dddddd\"/>\n";
        out << "<text x=\"" << sx(fx) << "\" y=\"" << kMT + ph + 18
            << "\" text-anchor=\"middle\">" << tick_label(fx) << "</text>\n";
        out << "<text x=\"" << kML - 8 << "\" y=\"" << sy(fy) + 4
            << "\" text-anchor=\"end\">" << tick_label(fy) << "</text>\n";
    }
    out << "<line x1=\"" << kML << "\" y1=\"" << kMT + ph << "\" x2=\"" << kML + pw << "\" y2=\""
        << kMT + ph << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << kML << "\" y1=\"" << kMT << "\" x2=\"" << kML << "\" y2=\"" << kMT + ph
        << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << kML + pw / 2 << "\" y=\"" << kH - 10
        << "\" text-anchor=\"middle\">gradient step</text>\n";
    out << "<text x=\"16\" y=\"" << kMT + ph / 2
        << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << kMT + ph / 2
        << ")\">suite reward (IQM)</text>\n";

    for (size_t r = 0; r < runs.size(); ++r) {
        const char* color = kPalette[r % (sizeof(kPalette) / sizeof(kPalette[0]))];
        const auto& agg = runs[r].aggregate;
        if (agg.empty()) continue;
        out << "<path d=\"";
        for (size_t i = 0; i < agg.size(); ++i) {
            out << (i == 0 ? "M" : "L") << sx(static_cast<double>(agg[i].gradient_step)) << ","
                << sy(agg[i].q75) << " ";
        }
        for (size_t i = agg.size(); i-- > 0;) {
            out << "L" << sx(static_cast<double>(agg[i].gradient_step)) << "," << sy(agg[i].q25) << " ";
        }
        out << "Z\" fill=\"" << color << "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (const eval::AggregatePoint& p : agg) {
            out << sx(static_cast<double>(p.gradient_step)) << "," << sy(p.iqm_reward) << " ";
        }
        out << "\"/>\n";
        for (const eval::AggregatePoint& p : agg) {
            out << "<circle cx=\"" << sx(static_cast<double>(p.gradient_step)) << "\" cy=\""
                << sy(p.iqm_reward) << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
        }
        const double ly = kMT + 10 + 20.0 * static_cast<double>(r);
        out << "<rect x=\"" << kML + pw + 16 << "\" y=\"" << ly - 9
            << "\" width=\"14\" height=\"14\" fill=\"" << color << "\"/>\n";
        out << "<text x=\"" << kML + pw + 36 << "\" y=\"" << ly + 2 << "\">"
            << xml_escape(runs[r].label) << "</text>\n";
    }
    out << "</svg>\n";
    if (!out) throw IoError(IoErrorKind::WriteFailed, "failed writing " + path);
}

}  // namespace

bool TrainOutcome::any_divergence() const {
    return std::any_of(seeds.begin(), seeds.end(),
                       [](const TrainSeedOutcome& s) { return s.diverged; });
}

size_t TrainOutcome::completed_seeds() const {
    size_t n = 0;
    for (const TrainSeedOutcome& s : seeds) n += s.diverged ? 0 : 1;
    return n;
}

CollectOutcome run_collect(const ExperimentConfig& cfg, std::ostream& log) {
    const bool traffic = cfg.env_kind == EnvKind::Traffic;
    const bool traffic_policy = cfg.dataset.policy == data::PolicyKind::TrafficScripted;
    if (traffic != traffic_policy) {
        throw ConfigError(std::string("dataset.policy '") +
                          (traffic_policy ? "traffic-scripted" : "maze-shortest-path") +
                          "' does not drive the '" + cfg.env_name() + "' environment");
    }
    if (cfg.dataset.episodes == 0) throw ConfigError("dataset.episodes must be positive");

    const data::BehaviorPolicy policy{cfg.dataset.policy, cfg.dataset.epsilon};
    const data::TransitionDataset ds =
        traffic ? data::collect_traffic(cfg.traffic, policy, cfg.dataset.episodes, cfg.dataset.seed)
                : data::collect_maze(cfg.maze, policy, cfg.dataset.episodes, cfg.dataset.seed);

    const fs::path out(cfg.dataset.path);
    if (out.has_parent_path()) ensure_dir(out.parent_path());
    data::save_dataset(ds, out.string());

    CollectOutcome result;
    result.dataset_path = out.string();
    result.manifest_path = out.string() + ".manifest";
    result.episodes = ds.episode_count();
    result.transitions = ds.size();
    const std::string bytes = read_file_bytes(out.string());
    result.file_checksum = fnv1a64(bytes.data(), bytes.size());

    // The dataset writer has already produced the manifest the loader needs;
    // extend it with collection provenance and distribution statistics.
    std::ofstream manifest(result.manifest_path, std::ios::binary | std::ios::app);
    if (!manifest) throw IoError(IoErrorKind::WriteFailed, "cannot open " + result.manifest_path);
    manifest << "policy = " << (traffic ? "traffic-scripted" : "maze-shortest-path") << "\n";
    manifest << "epsilon = " << std::setprecision(17) << cfg.dataset.epsilon << "\n";
    manifest << "file_checksum = " << hex64(result.file_checksum) << "\n";
    if (traffic) {
        const data::TrafficEpisodeStats stats = data::classify_traffic_dataset(ds, cfg.traffic);
        manifest << "red_at_front_episodes = " << stats.red_at_front_episodes << "\n";
        manifest << "halted_queue_episodes = " << stats.halted_queue_episodes << "\n";
        manifest << "tile_and_forward_transitions = " << stats.tile_and_forward_transitions << "\n";
        manifest << "tile_follower_matches = " << stats.tile_follower_matches << "\n";
    }
    if (!manifest) throw IoError(IoErrorKind::WriteFailed, "failed writing " + result.manifest_path);

    log << "[collect] " << ds.episode_count() << " episodes, " << ds.size() << " transitions -> "
        << result.dataset_path << " (checksum " << hex64(result.file_checksum) << ")\n";
    return result;
}

TrainOutcome run_train(const ExperimentConfig& cfg, std::ostream& log) {
    const data::TransitionDataset ds = load_training_dataset(cfg);

    std::optional<learner::EnsembleQ> scorer_init;
    if (cfg.sampler.source == sampling::SamplerSource::External) {
        scorer_init = learner::load_checkpoint(cfg.sampler.external_checkpoint);
        check_checkpoint_shape(*scorer_init, cfg, cfg.sampler.external_checkpoint);
        cfg.sampler.validate(static_cast<int>(scorer_init->members.size()));
    }

    const fs::path root(cfg.output_dir);
    ensure_dir(root);
    save_config(cfg, (root / "config.txt").string());
    log << "[train] dataset " << cfg.dataset.path << ": " << ds.size() << " transitions over "
        << ds.episode_count() << " episodes\n";

    TrainOutcome outcome;
    std::vector<eval::RewardCurve> completed;
    for (uint64_t seed : cfg.seeds) {
        const fs::path seed_dir = root / ("seed-" + std::to_string(seed));
        SeedRun run = train_one_seed(cfg, ds, scorer_init, seed, seed_dir, log);
        if (!run.outcome.diverged) completed.push_back(run.outcome.curve);
        outcome.seeds.push_back(std::move(run.outcome));
    }

    if (!completed.empty()) {
        outcome.aggregate = eval::aggregate_curves(completed);
        eval::write_aggregate_csv((root / "aggregate.csv").string(), outcome.aggregate);
    }
    log << "[train] " << outcome.completed_seeds() << "/" << cfg.seeds.size()
        << " seeds completed; outputs in " << cfg.output_dir << "\n";
    return outcome;
}

eval::EvalReport run_evaluate(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                              std::ostream& log) {
    const learner::EnsembleQ ens = learner::load_checkpoint(checkpoint_path);
    check_checkpoint_shape(ens, cfg, checkpoint_path);

    eval::EvalReport report = evaluate_suite(ens, cfg);
    report.epoch = 0;
    report.gradient_step = ens.gradient_steps;
    report.seed = 0;

    ensure_dir(cfg.output_dir);
    const fs::path out = fs::path(cfg.output_dir) / "evaluation.csv";
    eval::write_curves_csv(out.string(), {report});
    for (const auto& [name, reward] : report.scenario_rewards) {
        log << "[evaluate] " << name << ": " << reward << "\n";
    }
    log << "[evaluate] suite mean " << report.suite_mean << " -> " << out.string() << "\n";
    return report;
}

CompareOutcome run_compare(const std::vector<std::string>& run_dirs, const std::string& out_dir,
                           double target, int window, std::ostream& log) {
    if (run_dirs.empty()) throw ConfigError("compare needs at least one run directory");
    ensure_dir(out_dir);

    CompareOutcome outcome;
    std::map<std::string, int> label_uses;
    for (const std::string& dir : run_dirs) {
        fs::path p(dir);
        if (!p.has_filename()) p = p.parent_path();  // tolerate a trailing slash
        std::string label = p.filename().string();
        if (label.empty()) label = dir;
        const int uses = ++label_uses[label];
        if (uses > 1) label += "-" + std::to_string(uses);

        const std::vector<eval::RewardCurve> curves = read_run_curves(dir);
        if (curves.empty()) {
            throw ConfigError("run directory " + dir + " holds no completed reward curves");
        }

        RunComparison cmp;
        cmp.label = label;
        cmp.aggregate = eval::aggregate_curves(curves);
        eval::RewardCurve iqm_curve;
        for (const eval::AggregatePoint& pt : cmp.aggregate) {
            iqm_curve.points.push_back({pt.gradient_step, pt.iqm_reward});
        }
        cmp.convergence_step = eval::steps_to_convergence(iqm_curve, target, window);

        eval::write_aggregate_csv((fs::path(out_dir) / ("aggregate-" + label + ".csv")).string(),
                                  cmp.aggregate);
        log << "[compare] " << label << ": " << curves.size() << " seeds, "
            << cmp.aggregate.size() << " eval points";
        if (cmp.convergence_step) {
            log << ", reaches " << target << " at step " << *cmp.convergence_step;
        } else {
            log << ", never sustains " << target;
        }
        log << "\n";
        outcome.runs.push_back(std::move(cmp));
    }

    std::ofstream conv((fs::path(out_dir) / "convergence.csv").string(), std::ios::binary);
    if (!conv) throw IoError(IoErrorKind::WriteFailed, "cannot write convergence.csv");
    conv << "run,target,window,steps_to_convergence\n";
    conv << std::setprecision(12);
    for (const RunComparison& run : outcome.runs) {
        conv << run.label << "," << target << "," << window << ",";
        if (run.convergence_step) conv << *run.convergence_step;
        conv << "\n";
    }

    write_compare_svg((fs::path(out_dir) / "compare.svg").string(), outcome.runs);
    log << "[compare] wrote " << out_dir << "/convergence.csv and compare.svg\n";
    return outcome;
}

eval::HistogramReport run_histogram(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                                    std::ostream& log) {
    if (cfg.env_kind != EnvKind::Traffic) {
        throw ConfigError("histogram needs the traffic env: only it defines the rare-case tail "
                          "(flashing tile + forward action)");
    }
    if (cfg.sampler.kind == sampling::AcquisitionKind::Uniform) {
        throw ConfigError("histogram needs a scoring acquisition (sampler.kind = td-error, "
                          "variance-data, or variance-greedy)");
    }

    const learner::EnsembleQ ens = learner::load_checkpoint(checkpoint_path);
    check_checkpoint_shape(ens, cfg, checkpoint_path);
    const data::TransitionDataset ds = load_training_dataset(cfg);

    const std::vector<double> scores =
        sampling::score_dataset(ens, ds, cfg.sampler.kind, cfg.learner.gamma);

    const size_t tile_index = static_cast<size_t>(3 * cfg.traffic.corridor_len + 2);
    std::vector<uint8_t> tail(ds.size(), 0);
    size_t tail_count = 0;
    for (size_t i = 0; i < ds.size(); ++i) {
        const bool tile = ds.obs_row(i)[tile_index] > 0.5f;
        const bool forward = ds.actions[i] == 1;
        tail[i] = (tile && forward) ? 1 : 0;
        tail_count += tail[i];
    }

    const eval::HistogramReport report = eval::score_histogram(scores, tail);
    ensure_dir(cfg.output_dir);
    const fs::path out = fs::path(cfg.output_dir) / "histogram.csv";
    eval::write_histogram_csv(out.string(), report);
    log << "[histogram] " << tail_count << "/" << ds.size() << " tail transitions; tail mean score "
        << report.tail_mean << " sits at percentile " << report.percentile << " -> " << out.string()
        << "\n";
    return report;
}

}  // namespace oarl::cli
