/*
 * Copyright 2026 The sgformer-cpp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// sgf: command-line front end (train, eval, verify, bench, synth).
//
// Exit codes: 0 ok, 1 runtime failure (including NaN aborts and failed
// verification), 2 configuration error, 3 data error.

#include <sgf/bench.hpp>
#include <sgf/error.hpp>
#include <sgf/kernels.hpp>
#include <sgf/model.hpp>
#include <sgf/sbm.hpp>
#include <sgf/train.hpp>
#include <sgf/verify.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// key=value lines; '#' starts a comment. Keys are long flag names without
// the leading dashes. Values only fill options not given on the command line.
void apply_config_file(CLI::App* app, const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw sgf::ConfigError("cannot read config file " + path);
    }
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw sgf::ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        CLI::Option* opt = app->get_option_no_throw("--" + key);
        if (opt == nullptr || key == "config") {
            throw sgf::ConfigError(path + ":" + std::to_string(lineno) + ": unknown key '" + key +
                                   "'");
        }
        if (opt->count() > 0) {
            continue; // the command line wins
        }
        try {
            opt->add_result(value);
            opt->run_callback();
        } catch (const CLI::Error& e) {
            throw sgf::ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

std::size_t parse_batch_size(const std::string& s) {
    if (s == "FULL" || s == "full") {
        return 0;
    }
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(s, &pos);
        if (pos == s.size() && v >= 1) {
            return static_cast<std::size_t>(v);
        }
    } catch (const std::logic_error&) {
    }
    throw sgf::ConfigError("--batch-size must be a positive integer or FULL, got '" + s + "'");
}

void write_text(const fs::path& p, const std::string& s) {
    if (p.has_parent_path()) {
        fs::create_directories(p.parent_path());
    }
    std::ofstream f(p, std::ios::binary);
    f << s;
    if (!f.flush()) {
        throw sgf::Error("cannot write " + p.string());
    }
}

// ---- train ----------------------------------------------------------------------

struct TrainArgs {
    std::string data;
    std::string out = "run";
    std::string batch_size = "FULL";
    std::string precision = "f32";
    bool no_attn_bias = false;
    bool no_gcn_bias = false;
    bool no_timing = false;
    bool grid = false;
    sgf::RunConfig cfg;
};

template <typename T>
int train_and_write(const sgf::NodeDataset& ds, const sgf::RunConfig& cfg, const TrainArgs& a,
                    const json& provenance) {
    const fs::path out(a.out);
    fs::create_directories(out);
    std::ofstream metrics(out / "metrics.jsonl", std::ios::binary);
    if (!metrics) {
        throw sgf::Error("cannot write " + (out / "metrics.jsonl").string());
    }
    auto res = sgf::train<T>(
        ds, cfg, [&](const sgf::EpochRecord& r) { metrics << sgf::epoch_json(r) << '\n'; },
        !a.no_timing);
    metrics << sgf::summary_json(res.metrics, provenance.dump()) << '\n';
    metrics.close();
    sgf::save_checkpoint(res.params, out / "model.ckpt");
    std::printf("best_valid=%.6f test=%.6f\n", res.metrics.best_valid, res.metrics.best_test);
    return 0;
}

json provenance_json(const sgf::RunConfig& cfg, const TrainArgs& a) {
    json j = json::parse(sgf::run_config_json(cfg));
    j["data"] = a.data;
    j["threads"] = sgf::num_threads();
    j["timing"] = !a.no_timing;
    return j;
}

int cmd_train(TrainArgs a) {
    a.cfg.batch_size = parse_batch_size(a.batch_size);
    a.cfg.precision = sgf::precision_from_string(a.precision);
    a.cfg.attn_bias = !a.no_attn_bias;
    a.cfg.gcn_bias = !a.no_gcn_bias;
    a.cfg.validate();
    const sgf::NodeDataset ds = sgf::load_dataset(a.data);

    sgf::RunConfig cfg = a.cfg;
    if (a.grid) {
        fs::create_directories(a.out);
        std::ofstream log(fs::path(a.out) / "grid.jsonl", std::ios::binary);
        const sgf::GridSpec spec;
        std::size_t run = 0;
        const auto res = sgf::grid_search(ds, a.cfg, spec, [&](const sgf::RunConfig& c,
                                                              const sgf::Metrics& m) {
            log << sgf::summary_json(m, sgf::run_config_json(c)) << '\n';
            std::fprintf(stderr, "grid %zu/%zu valid=%.4f test=%.4f\n", ++run, spec.size(),
                         m.best_valid, m.best_test);
        });
        cfg = res.best;
    }
    const json prov = provenance_json(cfg, a);
    return cfg.precision == sgf::Precision::F64 ? train_and_write<double>(ds, cfg, a, prov)
                                                : train_and_write<float>(ds, cfg, a, prov);
}

// ---- eval -----------------------------------------------------------------------

struct EvalArgs {
    std::string data;
    std::string checkpoint;
    std::optional<std::string> batch_size;
    std::uint64_t seed = 0;
};

int cmd_eval(const EvalArgs& a) {
    std::optional<std::size_t> bs;
    if (a.batch_size) {
        const std::size_t b = parse_batch_size(*a.batch_size);
        if (b > 0) {
            bs = b;
        }
    }
    const sgf::NodeDataset ds = sgf::load_dataset(a.data);
    const sgf::SgformerParams<float> p = sgf::load_checkpoint(a.checkpoint);
    const auto& mc = p.config;
    if (mc.in_dim != ds.features.cols() || mc.out_dim != ds.labels.num_outputs ||
        mc.task != ds.labels.task) {
        throw sgf::DataError("checkpoint expects D=" + std::to_string(mc.in_dim) +
                             " C=" + std::to_string(mc.out_dim) + " task=" +
                             sgf::to_string(mc.task) + "; dataset has D=" +
                             std::to_string(ds.features.cols()) + " C=" +
                             std::to_string(ds.labels.num_outputs) + " task=" +
                             sgf::to_string(ds.labels.task));
    }
    const auto logits = sgf::predict_full_graph(p, ds, bs, a.seed);
    const double valid = sgf::evaluate(logits, ds.labels, ds.split.valid);
    const double test = sgf::evaluate(logits, ds.labels, ds.split.test);
    std::printf("valid=%.6f test=%.6f\n", valid, test);
    return 0;
}

// ---- verify ---------------------------------------------------------------------

int cmd_verify(const sgf::VerifyOptions& o, const std::string& out) {
    const sgf::VerifyReport r = sgf::run_verify(o);
    const std::string text = r.text();
    std::fputs(text.c_str(), stdout);
    if (!out.empty()) {
        write_text(out, text);
    }
    return r.ok() ? 0 : kExitRuntime;
}

// ---- bench ----------------------------------------------------------------------

struct BenchArgs {
    std::size_t min_n = 10000;
    std::size_t max_n = 100000;
    std::size_t steps = 10;
    bool no_timing = false;
    std::string out = "bench.csv";
    sgf::ScalingOptions o;
};

int cmd_bench(BenchArgs a) {
    a.o.n_values = sgf::bench_sizes(a.min_n, a.max_n, a.steps);
    a.o.timing = !a.no_timing;
    a.o.validate();
    if (const fs::path parent = fs::path(a.out).parent_path(); !parent.empty()) {
        fs::create_directories(parent);
    }
    const auto points = sgf::run_scaling(a.o);
    sgf::emit_csv(points, a.out);

    // Resolved configuration next to the CSV (the CSV header is fixed).
    json j;
    j["min_n"] = a.min_n;
    j["max_n"] = a.max_n;
    j["steps"] = a.steps;
    j["avg_degree"] = a.o.avg_degree;
    j["hidden"] = a.o.hidden;
    j["feat_dim"] = a.o.feat_dim;
    j["classes"] = a.o.classes;
    j["seed"] = a.o.seed;
    j["explicit_cap"] = a.o.explicit_cap;
    j["repeats"] = a.o.repeats;
    j["timing"] = a.o.timing;
    j["memory_budget"] = a.o.memory_budget;
    j["threads"] = sgf::num_threads();
    j["precision"] = "f32";
    write_text(a.out + ".json", j.dump(2) + "\n");
    std::fputs(sgf::bench_csv(points).c_str(), stdout);
    return 0;
}

// ---- synth ----------------------------------------------------------------------

int cmd_synth(const sgf::SbmOptions& o, const std::string& out) {
    const sgf::NodeDataset ds = sgf::generate_sbm(o);
    sgf::save_dataset(ds, out);
    std::printf("wrote %s: nodes=%zu edges=%zu classes=%zu feat_dim=%zu\n", out.c_str(),
                ds.graph.num_nodes(), ds.graph.num_undirected_edges(), ds.labels.num_outputs,
                ds.features.cols());
    return 0;
}

int resolve_threads(int flag) {
    if (flag > 0) {
        return flag;
    }
    if (const char* env = std::getenv("SGF_THREADS"); env != nullptr && *env != '\0') {
        try {
            const int v = std::stoi(env);
            if (v >= 1) {
                return v;
            }
        } catch (const std::logic_error&) {
        }
        throw sgf::ConfigError(std::string("SGF_THREADS must be a positive integer, got '") +
                               env + "'");
    }
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"SGFormer graph transformer: training, evaluation, verification, benchmarks"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every subcommand");

    int threads = 0;
    std::string config;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--threads", threads, "Kernel threads (default: $SGF_THREADS or 1)")
            ->check(CLI::PositiveNumber);
        sub->add_option("--config", config, "key=value file; command-line flags win");
    };

    // train
    TrainArgs ta;
    auto* train = app.add_subcommand("train", "Train a model and write metrics + checkpoint");
    train->add_option("--data", ta.data, "Dataset directory")->required();
    train->add_option("--out", ta.out, "Output directory (metrics.jsonl, model.ckpt)");
    train->add_option("--alpha", ta.cfg.alpha, "GCN branch weight");
    train->add_option("--hidden", ta.cfg.hidden);
    train->add_option("--lr", ta.cfg.lr);
    train->add_option("--weight-decay", ta.cfg.weight_decay);
    train->add_option("--dropout", ta.cfg.dropout);
    train->add_option("--epochs", ta.cfg.epochs);
    train->add_option("--gcn-depth", ta.cfg.gcn_depth);
    train->add_option("--batch-size", ta.batch_size, "Positive integer or FULL");
    train->add_option("--seed", ta.cfg.seed);
    train->add_option("--precision", ta.precision, "f32 or f64");
    train->add_option("--patience", ta.cfg.patience, "Early stop after this many epochs (0 = off)");
    train->add_flag("--no-attn-bias", ta.no_attn_bias, "Drop the query/key/value biases");
    train->add_flag("--no-gcn-bias", ta.no_gcn_bias);
    train->add_flag("--no-timing", ta.no_timing, "Write ms=0 for byte-reproducible metrics");
    train->add_flag("--grid", ta.grid, "Grid-search lr, weight decay, hidden, dropout, alpha first");
    common(train);

    // eval
    EvalArgs ea;
    auto* eval = app.add_subcommand("eval", "Score a checkpoint with full-graph inference");
    eval->add_option("--data", ea.data)->required();
    eval->add_option("--checkpoint", ea.checkpoint)->required();
    eval->add_option("--batch-size", ea.batch_size, "Batched inference on random partitions");
    eval->add_option("--seed", ea.seed, "Partition seed for --batch-size");
    common(eval);

    // verify
    sgf::VerifyOptions vo;
    std::string verify_out;
    bool fault = false;
    auto* verify = app.add_subcommand("verify", "Run the numerical property suite");
    verify->add_option("--seed", vo.seed);
    verify->add_option("--trials", vo.trials, "Random instances per group")
        ->check(CLI::PositiveNumber);
    verify->add_option("--out", verify_out, "Also write the report here");
    verify->add_flag("--inject-fault", fault)->group(""); // 1/sqrt(N) cross-term scale
    common(verify);

    // bench
    BenchArgs ba;
    auto* bench = app.add_subcommand("bench", "Forward/backward time and memory versus N");
    bench->add_option("--min-n", ba.min_n);
    bench->add_option("--max-n", ba.max_n);
    bench->add_option("--steps", ba.steps);
    bench->add_option("--avg-degree", ba.o.avg_degree);
    bench->add_option("--hidden", ba.o.hidden);
    bench->add_option("--feat-dim", ba.o.feat_dim);
    bench->add_option("--classes", ba.o.classes);
    bench->add_option("--seed", ba.o.seed);
    bench->add_option("--explicit-cap", ba.o.explicit_cap, "Largest N for explicit attention (0 = off)");
    bench->add_option("--repeats", ba.o.repeats);
    bench->add_option("--memory-budget", ba.o.memory_budget, "Bytes; larger points record OOM");
    bench->add_flag("--no-timing", ba.no_timing, "Skip clocks; ms columns are 0");
    bench->add_option("--out", ba.out);
    common(bench);

    // synth
    sgf::SbmOptions so;
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "Generate a stochastic-block-model dataset");
    synth->add_option("--nodes", so.nodes);
    synth->add_option("--classes", so.classes);
    synth->add_option("--p-in", so.p_in);
    synth->add_option("--p-out", so.p_out);
    synth->add_option("--sep", so.sep);
    synth->add_option("--feat-dim", so.feat_dim);
    synth->add_option("--train-frac", so.train_frac);
    synth->add_option("--valid-frac", so.valid_frac);
    synth->add_option("--seed", so.seed);
    synth->add_option("--out", synth_out)->required();
    common(synth);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        CLI::App* sub = app.get_subcommands().front();
        if (!config.empty()) {
            apply_config_file(sub, config);
        }
        sgf::set_num_threads(resolve_threads(threads));
        if (sub == train) {
            return cmd_train(ta);
        }
        if (sub == eval) {
            return cmd_eval(ea);
        }
        if (sub == verify) {
            vo.scale = fault ? sgf::AttentionScale::InverseSqrtN : sgf::AttentionScale::InverseN;
            return cmd_verify(vo, verify_out);
        }
        if (sub == bench) {
            return cmd_bench(ba);
        }
        return cmd_synth(so, synth_out);
    } catch (const sgf::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const sgf::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}
