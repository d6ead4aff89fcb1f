#include "maker/harness.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace maker::harness {

namespace fs = std::filesystem;
using nlohmann::json;

forecaster::ModelConfig ExperimentConfig::model_config() const {
    forecaster::ModelConfig mc;
    mc.encoder = {h, patch_len, patch_stride, d_m, enc_blocks, enc_heads, 4,
                  mask_ratio};
    mc.fusion = {d_m, d_llm, hidden_d, prototypes, dec_width};
    mc.p = p;
    mc.dec_width = dec_width;
    mc.dec_blocks = dec_blocks;
    mc.dec_heads = dec_heads;
    return mc;
}

trainer::TrainConfig ExperimentConfig::train_config() const {
    trainer::TrainConfig tc;
    tc.epochs = epochs;
    tc.batch_size = batch_size;
    tc.lr = lr;
    tc.lambda0 = lambda0;
    tc.growth = growth;
    tc.vel_weight = vel_weight;
    tc.acc_weight = acc_weight;
    if (gate_scope == "recon_kinematic")
        tc.gate_scope = trainer::GateScope::ReconKinematic;
    else if (gate_scope == "all")
        tc.gate_scope = trainer::GateScope::All;
    else
        throw std::invalid_argument("unknown gate_scope: " + gate_scope);
    tc.seed = seed;
    tc.dataset_name = dataset_name;
    return tc;
}

forecaster::AblationFlags ExperimentConfig::flags() const {
    return forecaster::flags_for_variant(variant);
}

namespace {

struct KeyBinder {
    std::map<std::string, std::function<void(const std::string&)>> setters;
    template <typename T>
    void bind(const std::string& key, T& ref) {
        setters[key] = [&ref](const std::string& v) {
            std::istringstream in(v);
            in >> ref;
            if (in.fail()) throw std::invalid_argument("bad value: " + v);
        };
    }
    void bind(const std::string& key, std::string& ref) {
        setters[key] = [&ref](const std::string& v) { ref = v; };
    }
};

KeyBinder make_binder(ExperimentConfig& c) {
    KeyBinder b;
    b.bind("data", c.data);
    b.bind("dataset_name", c.dataset_name);
    b.bind("synth_count", c.synth_count);
    b.bind("synth_kind", c.synth_kind);
    b.bind("synth_len", c.synth_len);
    b.bind("synth_noise", c.synth_noise);
    b.bind("interval", c.interval);
    b.bind("interval_base", c.interval_base);
    b.bind("interval_jitter", c.interval_jitter);
    b.bind("h", c.h);
    b.bind("p", c.p);
    b.bind("stride", c.stride);
    b.bind("patch_len", c.patch_len);
    b.bind("patch_stride", c.patch_stride);
    b.bind("d_m", c.d_m);
    b.bind("enc_blocks", c.enc_blocks);
    b.bind("enc_heads", c.enc_heads);
    b.bind("mask_ratio", c.mask_ratio);
    b.bind("hidden_d", c.hidden_d);
    b.bind("prototypes", c.prototypes);
    b.bind("dec_width", c.dec_width);
    b.bind("dec_blocks", c.dec_blocks);
    b.bind("dec_heads", c.dec_heads);
    b.bind("lm_provider", c.lm_provider);
    b.bind("stub_vocab", c.stub_vocab);
    b.bind("d_llm", c.d_llm);
    b.bind("variant", c.variant);
    b.bind("seed", c.seed);
    b.bind("epochs", c.epochs);
    b.bind("batch_size", c.batch_size);
    b.bind("lr", c.lr);
    b.bind("lambda0", c.lambda0);
    b.bind("growth", c.growth);
    b.bind("vel_weight", c.vel_weight);
    b.bind("acc_weight", c.acc_weight);
    b.bind("gate_scope", c.gate_scope);
    b.bind("train_frac", c.train_frac);
    b.bind("val_frac", c.val_frac);
    return b;
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

data::IntervalModel interval_model(const ExperimentConfig& cfg) {
    data::IntervalModel im;
    im.base_s = cfg.interval_base;
    im.jitter_s = cfg.interval_jitter;
    if (cfg.interval == "regular")
        im.kind = data::IntervalModel::Kind::Regular;
    else if (cfg.interval == "jittered")
        im.kind = data::IntervalModel::Kind::Jittered;
    else if (cfg.interval == "bursty")
        im.kind = data::IntervalModel::Kind::Bursty;
    else
        throw std::invalid_argument("unknown interval model: " + cfg.interval);
    return im;
}

json band_report_json(const metrics::BandReport& rep) {
    json j;
    j["mae_deg"] = rep.mae_deg;
    j["mae_norm"] = rep.mae_norm;
    j["step_counts"] = rep.step_counts;
    j["sample_count"] = rep.sample_count;
    return j;
}

void write_band_csv(const std::string& path, const metrics::BandReport& rep) {
    std::ofstream out(path);
    out << "band,mae_deg,mae_norm,steps\n";
    for (const auto& [band, v] : rep.mae_deg)
        out << band << "," << v << "," << rep.mae_norm.at(band) << ","
            << rep.step_counts.at(band) << "\n";
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

struct Runtime {
    ExperimentConfig cfg;
    std::unique_ptr<prompt_lm::FrozenLMProvider> provider;
    std::unique_ptr<forecaster::Forecaster> model;
    Splits splits;
};

Runtime make_runtime(const ExperimentConfig& cfg) {
    Runtime rt;
    rt.cfg = cfg;
    rt.provider = prompt_lm::make_provider(cfg.lm_provider, cfg.stub_vocab,
                                           cfg.d_llm, cfg.seed + 17);
    rt.model = std::make_unique<forecaster::Forecaster>(cfg.model_config());
    rt.splits = split_and_prepare(cfg, build_dataset(cfg), *rt.provider);
    return rt;
}

void write_run_stamp(const fs::path& dir, const ExperimentConfig& cfg) {
    json j{{"config_hash", config_hash(cfg)}, {"seed", cfg.seed}};
    write_text((dir / "run.json").string(), j.dump(2) + "\n");
    write_text((dir / "config.txt").string(), serialize_config(cfg));
}

int run_train(const ExperimentConfig& cfg, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    Runtime rt = make_runtime(cfg);
    ad::ParamStore store;
    rt.model->init_params(store, cfg.seed, *rt.provider);

    auto tc = cfg.train_config();
    tc.log_path = (out_dir / "train_log.ndjson").string();
    tc.checkpoint_path = (out_dir / "checkpoint.json").string();
    trainer::Trainer tr(*rt.model, *rt.provider, tc);
    const auto res = tr.train(store, rt.splits.train, rt.splits.val, cfg.flags());

    const auto rep = metrics::evaluate_samples(*rt.model, store, rt.splits.test,
                                               cfg.flags(), *rt.provider);
    json j = band_report_json(rep);
    j["final_val_mae_deg"] = res.final_val_mae_deg;
    j["steps"] = res.steps;
    j["lambda"] = res.final_lambda;
    write_text((out_dir / "metrics.json").string(), j.dump(2) + "\n");
    write_band_csv((out_dir / "metrics.csv").string(), rep);
    write_run_stamp(out_dir, cfg);
    std::cout << "result: " << (out_dir / "metrics.json").string() << "\n";
    return 0;
}

int run_evaluate(const ExperimentConfig& cfg, const std::string& checkpoint,
                 const fs::path& out_dir, const std::string& split) {
    fs::create_directories(out_dir);
    Runtime rt = make_runtime(cfg);
    ad::ParamStore store;
    rt.model->init_params(store, cfg.seed, *rt.provider);
    forecaster::load_checkpoint(checkpoint, store);
    const auto& samples = split == "train"  ? rt.splits.train
                          : split == "val"  ? rt.splits.val
                                            : rt.splits.test;
    const auto rep = metrics::evaluate_samples(*rt.model, store, samples,
                                               cfg.flags(), *rt.provider);
    write_text((out_dir / "metrics.json").string(),
               band_report_json(rep).dump(2) + "\n");
    write_band_csv((out_dir / "metrics.csv").string(), rep);
    write_run_stamp(out_dir, cfg);
    std::cout << "result: " << (out_dir / "metrics.json").string() << "\n";
    return 0;
}

int run_stratify(const ExperimentConfig& cfg, const std::string& checkpoint,
                 const fs::path& out_dir) {
    fs::create_directories(out_dir);
    Runtime rt = make_runtime(cfg);
    ad::ParamStore store;
    rt.model->init_params(store, cfg.seed, *rt.provider);
    forecaster::load_checkpoint(checkpoint, store);
    const auto rep = metrics::stratified_evaluate(*rt.model, store, rt.splits.test,
                                                  cfg.flags(), *rt.provider);
    json j;
    std::ostringstream csv;
    csv << "axis,level,mae_deg,count\n";
    for (const auto& [axis, row] : rep.cells)
        for (const auto& [level, cell] : row) {
            j[axis][level] = {{"mae_deg", cell.mae_deg}, {"count", cell.count}};
            csv << axis << "," << level << "," << cell.mae_deg << "," << cell.count
                << "\n";
        }
    write_text((out_dir / "stratified.json").string(), j.dump(2) + "\n");
    write_text((out_dir / "stratified.csv").string(), csv.str());
    write_run_stamp(out_dir, cfg);
    std::cout << "result: " << (out_dir / "stratified.json").string() << "\n";
    return 0;
}

int run_ablate(const ExperimentConfig& cfg, const std::vector<std::string>& variants,
               const fs::path& out_dir) {
    fs::create_directories(out_dir);
    // validate every variant before any training starts
    for (const auto& v : variants) forecaster::flags_for_variant(v);

    json table = json::object();
    std::ostringstream csv;
    csv << "variant,band,mae_deg,mae_norm\n";
    for (const auto& v : variants) {
        ExperimentConfig vc = cfg;
        vc.variant = v;
        Runtime rt = make_runtime(vc);
        ad::ParamStore store;
        rt.model->init_params(store, vc.seed, *rt.provider);
        auto tc = vc.train_config();
        tc.log_path = (out_dir / ("train_log_" + v + ".ndjson")).string();
        trainer::Trainer tr(*rt.model, *rt.provider, tc);
        tr.train(store, rt.splits.train, rt.splits.val, vc.flags());
        const auto rep = metrics::evaluate_samples(*rt.model, store, rt.splits.test,
                                                   vc.flags(), *rt.provider);
        table[v] = band_report_json(rep);
        for (const auto& [band, mae] : rep.mae_deg)
            csv << v << "," << band << "," << mae << "," << rep.mae_norm.at(band)
                << "\n";
    }
    write_text((out_dir / "ablation.json").string(), table.dump(2) + "\n");
    write_text((out_dir / "ablation.csv").string(), csv.str());
    write_run_stamp(out_dir, cfg);
    std::cout << "result: " << (out_dir / "ablation.json").string() << "\n";
    return 0;
}

}  // namespace

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config: " + path);
    ExperimentConfig cfg;
    KeyBinder binder = make_binder(cfg);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                        ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        auto it = binder.setters.find(key);
        if (it == binder.setters.end())
            throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                        ": unknown key: " + key);
        it->second(value);
    }
    return cfg;
}

std::string serialize_config(const ExperimentConfig& c) {
    std::ostringstream out;
    out.precision(17);
    out << "data = " << c.data << "\ndataset_name = " << c.dataset_name
        << "\nsynth_count = " << c.synth_count << "\nsynth_kind = " << c.synth_kind
        << "\nsynth_len = " << c.synth_len << "\nsynth_noise = " << c.synth_noise
        << "\ninterval = " << c.interval << "\ninterval_base = " << c.interval_base
        << "\ninterval_jitter = " << c.interval_jitter << "\nh = " << c.h
        << "\np = " << c.p << "\nstride = " << c.stride
        << "\npatch_len = " << c.patch_len << "\npatch_stride = " << c.patch_stride
        << "\nd_m = " << c.d_m << "\nenc_blocks = " << c.enc_blocks
        << "\nenc_heads = " << c.enc_heads << "\nmask_ratio = " << c.mask_ratio
        << "\nhidden_d = " << c.hidden_d << "\nprototypes = " << c.prototypes
        << "\ndec_width = " << c.dec_width << "\ndec_blocks = " << c.dec_blocks
        << "\ndec_heads = " << c.dec_heads << "\nlm_provider = " << c.lm_provider
        << "\nstub_vocab = " << c.stub_vocab << "\nd_llm = " << c.d_llm
        << "\nvariant = " << c.variant << "\nseed = " << c.seed
        << "\nepochs = " << c.epochs << "\nbatch_size = " << c.batch_size
        << "\nlr = " << c.lr << "\nlambda0 = " << c.lambda0
        << "\ngrowth = " << c.growth << "\nvel_weight = " << c.vel_weight
        << "\nacc_weight = " << c.acc_weight << "\ngate_scope = " << c.gate_scope
        << "\ntrain_frac = " << c.train_frac << "\nval_frac = " << c.val_frac
        << "\n";
    return out.str();
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
    const std::string s = serialize_config(cfg);
    return ad::fnv1a(s.data(), s.size());
}

std::vector<data::Trajectory> build_dataset(const ExperimentConfig& cfg) {
    if (!cfg.data.empty()) return data::read_canonical(cfg.data);
    std::vector<data::Trajectory> trajs;
    const auto im = interval_model(cfg);
    const auto kind = data::synth_kind_from_string(cfg.synth_kind);
    for (int i = 0; i < cfg.synth_count; ++i)
        trajs.push_back(data::synth_trajectory(kind, cfg.synth_len, cfg.synth_noise,
                                               cfg.seed * 1000 + std::uint64_t(i), im));
    return trajs;
}

Splits split_and_prepare(const ExperimentConfig& cfg,
                         const std::vector<data::Trajectory>& trajs,
                         const prompt_lm::FrozenLMProvider& provider) {
    // split by trajectory so no window leaks across splits
    std::vector<std::size_t> order(trajs.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(cfg.seed ^ 0xa5a5a5a5ULL);
    std::shuffle(order.begin(), order.end(), rng);

    const auto n = trajs.size();
    const auto n_train = std::size_t(double(n) * cfg.train_frac);
    const auto n_val = std::size_t(double(n) * cfg.val_frac);

    const bool use_prompt = cfg.flags().use_prompt && cfg.flags().use_llm;
    Splits out;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& traj = trajs[order[i]];
        auto* dest = i < n_train              ? &out.train
                     : i < n_train + n_val    ? &out.val
                                              : &out.test;
        for (const auto& w : data::window_samples(traj, cfg.h, cfg.p, cfg.stride))
            dest->push_back(forecaster::prepare_sample(w, &provider,
                                                       cfg.dataset_name, use_prompt));
    }
    return out;
}

int cli(int argc, const char* const* argv) {
    CLI::App app{"MAKER vessel trajectory prediction"};
    app.require_subcommand(1);
    // let --config/--seed/--out appear before or after the subcommand
    app.fallthrough();

    std::string config_path, out_dir = "out", checkpoint, split = "test";
    std::int64_t seed_override = -1;
    app.add_option("--config", config_path, "experiment config file")
        ->configurable(false);
    app.add_option("--seed", seed_override, "seed override");
    app.add_option("--out", out_dir, "output directory");

    auto* ingest = app.add_subcommand("ingest", "parse AIS CSV into the canonical store");
    std::string in_path, dialect = "us_coast";
    double min_interval = 180.0, max_gap = 1800.0;
    ingest->add_option("--in", in_path, "input CSV")->required();
    ingest->add_option("--dialect", dialect, "us_coast | danish");
    ingest->add_option("--min-interval", min_interval, "seconds");
    ingest->add_option("--max-gap", max_gap, "seconds");

    auto* synth = app.add_subcommand("synth", "generate synthetic trajectories");
    std::string kind = "mixed";
    int count = 8, n_points = 96;
    double noise = 0.0003;
    std::string interval = "jittered";
    synth->add_option("--kind", kind, "straight | loop | zigzag | mixed");
    synth->add_option("--count", count, "number of trajectories");
    synth->add_option("--n", n_points, "points per trajectory");
    synth->add_option("--noise", noise, "position noise, degrees");
    synth->add_option("--interval", interval, "regular | jittered | bursty");

    auto* train = app.add_subcommand("train", "train a model");
    auto* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint");
    evaluate->add_option("--checkpoint", checkpoint, "checkpoint file");
    evaluate->add_option("--split", split, "train | val | test");
    auto* ablate = app.add_subcommand("ablate", "train and evaluate ablation variants");
    std::string variants_arg = "full,MAKER-LLM,MAKER-Prompt,MAKER-MKT,MAKER-de,MAKER-KSL";
    ablate->add_option("--variants", variants_arg, "comma-separated variant list");
    auto* stratify = app.add_subcommand("stratify", "quartile-stratified evaluation");
    stratify->add_option("--checkpoint", checkpoint, "checkpoint file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        ExperimentConfig cfg;
        if (app.got_subcommand(train) || app.got_subcommand(evaluate) ||
            app.got_subcommand(ablate) || app.got_subcommand(stratify)) {
            if (config_path.empty()) {
                std::cerr << "error: --config is required\n";
                return 2;
            }
            cfg = load_config(config_path);
            if (seed_override >= 0) cfg.seed = std::uint64_t(seed_override);
        }

        if (app.got_subcommand(ingest)) {
            const auto d = dialect == "us_coast" ? data::Dialect::UsCoast
                           : dialect == "danish" ? data::Dialect::Danish
                                                 : throw std::invalid_argument(
                                                       "unknown dialect: " + dialect);
            const auto parsed = data::parse_ais_csv(in_path, d);
            const auto trajs =
                data::segment_trajectories(parsed.records, min_interval, max_gap);
            // gap splitting can produce several trajectories per vessel; give
            // each segment its own id in the store
            std::vector<data::Trajectory> tagged;
            std::map<std::string, int> seg_counter;
            for (auto t : trajs) {
                t.vessel_id += "#" + std::to_string(seg_counter[t.vessel_id]++);
                for (auto& r : t.records) r.vessel_id = t.vessel_id;
                tagged.push_back(std::move(t));
            }
            fs::create_directories(out_dir);
            const auto path = fs::path(out_dir) / "canonical.csv";
            data::write_canonical(path.string(), tagged);
            std::cout << "result: " << path.string() << " (dropped " << parsed.dropped
                      << " rows)\n";
            return 0;
        }
        if (app.got_subcommand(synth)) {
            std::vector<data::Trajectory> trajs;
            ExperimentConfig sc;
            sc.interval = interval;
            const auto im = interval_model(sc);
            const std::uint64_t seed = seed_override >= 0 ? std::uint64_t(seed_override) : 1;
            for (int i = 0; i < count; ++i)
                trajs.push_back(data::synth_trajectory(
                    data::synth_kind_from_string(kind), n_points, noise,
                    seed * 1000 + std::uint64_t(i), im));
            fs::create_directories(out_dir);
            const auto path = fs::path(out_dir) / "canonical.csv";
            data::write_canonical(path.string(), trajs);
            std::cout << "result: " << path.string() << "\n";
            return 0;
        }
        if (app.got_subcommand(train)) return run_train(cfg, out_dir);
        if (app.got_subcommand(evaluate)) {
            if (checkpoint.empty()) {
                std::cerr << "error: --checkpoint is required\n";
                return 2;
            }
            return run_evaluate(cfg, checkpoint, out_dir, split);
        }
        if (app.got_subcommand(stratify)) {
            if (checkpoint.empty()) {
                std::cerr << "error: --checkpoint is required\n";
                return 2;
            }
            return run_stratify(cfg, checkpoint, out_dir);
        }
        if (app.got_subcommand(ablate)) {
            std::vector<std::string> variants;
            std::stringstream ss(variants_arg);
            std::string v;
            while (std::getline(ss, v, ',')) variants.push_back(trim(v));
            return run_ablate(cfg, variants, out_dir);
        }
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace maker::harness
