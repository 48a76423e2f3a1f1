#include "tubalnet/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>

#include "tubalnet/backprop.hpp"
#include "tubalnet/data_io.hpp"
#include "tubalnet/errors.hpp"
#include "tubalnet/network.hpp"
#include "tubalnet/transform.hpp"

namespace tubalnet::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string fmt_g17(double v) {
    if (std::isnan(v)) return "";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

ordered_json number_or_null(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

Dims parse_dims(const std::string& text) {
    Dims d{};
    std::size_t* fields[3] = {&d.n1, &d.n2, &d.n3};
    const char* p = text.data();
    const char* end = text.data() + text.size();
    for (int f = 0; f < 3; ++f) {
        auto [next, ec] = std::from_chars(p, end, *fields[f]);
        if (ec != std::errc() || *fields[f] == 0) throw ConfigError("bad --dims '" + text + "', expected N1xN2xN3");
        p = next;
        if (f < 2) {
            if (p == end || (*p != 'x' && *p != 'X')) throw ConfigError("bad --dims '" + text + "', expected N1xN2xN3");
            ++p;
        }
    }
    if (p != end) throw ConfigError("bad --dims '" + text + "', expected N1xN2xN3");
    return d;
}

// Raw flag values; converted to TrainConfig after parsing so that --help shows TrainConfig defaults.
struct TrainFlags {
    TrainConfig cfg;
    std::string activation{to_string(TrainConfig{}.activation)};
    std::string pooling{to_string(TrainConfig{}.pooling)};
    bool no_normalize = false;

    TrainConfig resolve() const {
        TrainConfig c = cfg;
        c.activation = parse_activation(activation);
        c.pooling = parse_pooling(pooling);
        c.normalize = !no_normalize;
        c.validate();
        return c;
    }
};

void add_train_flags(CLI::App* app, TrainFlags& f) {
    app->add_option("--epochs", f.cfg.epochs, "Maximum number of gradient steps")->capture_default_str();
    app->add_option("--lr", f.cfg.learning_rate, "Learning rate")->capture_default_str();
    app->add_option("--weight-decay", f.cfg.weight_decay, "L2 penalty on all parameters")->capture_default_str();
    app->add_option("--depth", f.cfg.depth, "Layers per branch (>= 2)")->capture_default_str();
    app->add_option("--latent-dim", f.cfg.latent_dim, "Latent slice count m")->capture_default_str();
    app->add_option("--activation", f.activation, "sigmoid | relu | tanh | linear")->capture_default_str();
    app->add_option("--pooling", f.pooling, "stacked | tube-wise")->capture_default_str();
    app->add_option("--transform", f.cfg.transform, "dct | identity | rand-orth:<seed>")->capture_default_str();
    app->add_option("--seed", f.cfg.seed, "Random seed")->capture_default_str();
    app->add_flag("--no-normalize", f.no_normalize, "Train on raw values instead of z-scored ones");
    app->add_option("--patience", f.cfg.patience, "Early-stopping patience in epochs (0 disables)")
        ->capture_default_str();
    app->add_option("--validation-fraction", f.cfg.validation_fraction, "Share of observed entries held out")
        ->capture_default_str();
    app->add_option("--batch-columns", f.cfg.batch_columns, "Lateral columns per step (0 = full batch)")
        ->capture_default_str();
    app->add_option("--init-gain", f.cfg.init_gain, "Weight init scale times 1/sqrt(fan_in)")->capture_default_str();
}

ordered_json config_json(const TrainConfig& c) {
    ordered_json j;
    j["epochs"] = c.epochs;
    j["learning_rate"] = c.learning_rate;
    j["weight_decay"] = c.weight_decay;
    j["depth"] = c.depth;
    j["latent_dim"] = c.latent_dim;
    j["activation"] = std::string(to_string(c.activation));
    j["pooling"] = std::string(to_string(c.pooling));
    j["transform"] = c.transform;
    j["seed"] = c.seed;
    j["normalize"] = c.normalize;
    j["patience"] = c.patience;
    j["validation_fraction"] = c.validation_fraction;
    j["batch_columns"] = c.batch_columns;
    j["init_gain"] = c.init_gain;
    return j;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open " + path.string() + " for writing");
    os << text;
    if (!os) throw FormatError("failed writing " + path.string());
}

struct Manifest {
    std::vector<std::string> argv;
    std::string subcommand;
    std::optional<TrainConfig> config;
    std::uint64_t seed = 0;
    ordered_json inputs = ordered_json::object();
    std::vector<std::string> outputs;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    void input(const std::string& role, const fs::path& path) {
        inputs[role] = {{"path", path.string()}, {"fnv1a64", fnv1a_hex(read_file_bytes(path))}};
    }

    void write(const fs::path& dir) {
        const fs::path path = dir / "manifest.json";
        outputs.push_back(path.string());
        ordered_json j;
        j["command"] = argv;
        j["subcommand"] = subcommand;
        j["config"] = config ? config_json(*config) : ordered_json(nullptr);
        j["seed"] = seed;
        j["inputs"] = inputs;
        j["outputs"] = outputs;
        j["timing"] = {{"wall_seconds",
                        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()}};
        write_text(path, j.dump(2) + "\n");
    }
};

ObservationMask finite_entries(const Tensor3& t) {
    ObservationMask m(t.dims(), true);
    const auto data = t.data();
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!std::isfinite(data[i])) m.set(i, false);
    }
    return m;
}

int last_epoch(const RunReport& report) { return report.epochs.empty() ? 0 : report.epochs.back().epoch; }

void write_run_outputs(const fs::path& dir, const TrainResult& result, Manifest& manifest) {
    const fs::path completed = dir / "completed.t3b";
    write_tensor(result.x_completed, completed);
    write_text(dir / "report.csv", report_csv(result.report));
    write_text(dir / "report.json", report_json(result.report));
    manifest.outputs.push_back(completed.string());
    manifest.outputs.push_back((dir / "report.csv").string());
    manifest.outputs.push_back((dir / "report.json").string());
}

int cmd_complete(const fs::path& input, const std::optional<fs::path>& mask_path,
                 const std::optional<double>& missing_rate, const std::optional<fs::path>& truth_path,
                 const fs::path& out_dir, const TrainConfig& cfg, Manifest& manifest, std::ostream& out) {
    manifest.config = cfg;
    manifest.seed = cfg.seed;
    manifest.input("input", input);
    Tensor3 r = read_tensor(input);
    const ObservationMask finite = finite_entries(r);

    ObservationMask mask = finite;
    if (mask_path) {
        manifest.input("mask", *mask_path);
        mask = read_mask(*mask_path);
        if (mask.dims() != r.dims()) {
            throw ShapeError("mask dims " + to_string(mask.dims()) + " differ from input " + to_string(r.dims()));
        }
        mask = mask.intersect(finite);
    } else if (missing_rate) {
        mask = random_missing_mask(r.dims(), *missing_rate, cfg.seed).intersect(finite);
    }
    // Non-finite entries never reach the network.
    for (std::size_t i = 0; i < r.data().size(); ++i) {
        if (!finite[i]) r.data()[i] = 0.0;
    }

    std::optional<Tensor3> truth;
    if (truth_path) {
        manifest.input("truth", *truth_path);
        truth = read_tensor(*truth_path);
        if (truth->dims() != r.dims()) {
            throw ShapeError("truth dims " + to_string(truth->dims()) + " differ from input " + to_string(r.dims()));
        }
    } else if (missing_rate || mask_path) {
        truth = r;  // held-out entries of the input itself
    }
    std::optional<EvalSet> eval;
    if (truth) {
        ObservationMask held = mask.complement().intersect(finite_entries(*truth));
        if (!truth_path) held = held.intersect(finite);
        if (held.count() > 0) eval = EvalSet{&*truth, held};
    }

    fs::create_directories(out_dir);
    const TrainResult result = train_completion(r, mask, cfg, eval);
    write_mask(mask, out_dir / "mask.t3m");
    manifest.outputs.push_back((out_dir / "mask.t3m").string());
    write_run_outputs(out_dir, result, manifest);
    manifest.write(out_dir);

    if (result.report.final_test_rmse) out << "test_rmse " << fmt_g17(*result.report.final_test_rmse) << "\n";
    out << "epochs " << last_epoch(result.report) << "\n";
    return kOk;
}

int cmd_synth(const Dims& dims, std::size_t rank, double missing_rate, const fs::path& out_dir,
              const TrainConfig& cfg, Manifest& manifest, std::ostream& out) {
    manifest.config = cfg;
    manifest.seed = cfg.seed;
    const TransformMatrix m = make_transform(cfg.transform, dims.n3);
    const Tensor3 truth = make_synthetic_low_rank(dims, rank, cfg.seed, m);
    const ObservationMask mask = random_missing_mask(dims, missing_rate, cfg.seed + 1);
    const ObservationMask held = mask.complement();
    std::optional<EvalSet> eval;
    if (held.count() > 0) eval = EvalSet{&truth, held};

    fs::create_directories(out_dir);
    const TrainResult result = train_completion(mask.apply(truth), mask, cfg, eval);
    write_tensor(truth, out_dir / "truth.t3b");
    write_mask(mask, out_dir / "mask.t3m");
    manifest.outputs.push_back((out_dir / "truth.t3b").string());
    manifest.outputs.push_back((out_dir / "mask.t3m").string());
    write_run_outputs(out_dir, result, manifest);

    const double train_rmse = mask.count() > 0 ? rmse(truth, result.x_estimate, mask) : std::nan("");
    std::string test_cell;
    std::string mean_cell;
    std::string ratio_cell;
    if (held.count() > 0) {
        const double test = rmse(truth, result.x_completed, held);
        const double mean = rmse(truth, mean_fill(truth, mask), held);
        test_cell = fmt_g17(test);
        mean_cell = fmt_g17(mean);
        ratio_cell = mean > 0.0 ? fmt_g17(test / mean) : "";
    }
    std::ostringstream row;
    row << "dims,rank,missing_rate,seed,epochs,train_rmse,test_rmse,meanfill_rmse,ratio\n"
        << dims.n1 << 'x' << dims.n2 << 'x' << dims.n3 << ',' << rank << ',' << fmt_g17(missing_rate) << ','
        << cfg.seed << ',' << last_epoch(result.report) << ',' << fmt_g17(train_rmse) << ',' << test_cell
        << ',' << mean_cell << ',' << ratio_cell << "\n";
    write_text(out_dir / "synth.csv", row.str());
    manifest.outputs.push_back((out_dir / "synth.csv").string());
    manifest.write(out_dir);

    out << row.str();
    return kOk;
}

int cmd_gradcheck(const Dims& dims, std::size_t depth, std::size_t latent_dim, std::uint64_t seed, double epsilon,
                  const std::string& activation, const std::string& pooling, const std::string& transform,
                  const std::optional<std::string>& corrupt, const std::optional<fs::path>& out_dir,
                  std::ostream& out, std::ostream& err) {
    if (dims.n1 > 8 || dims.n2 > 8 || dims.n3 > 8) throw ConfigError("gradcheck dims must be <= 8 each");
    if (depth < 2) throw ConfigError("--depth must be >= 2");
    if (latent_dim == 0) throw ConfigError("--latent-dim must be positive");
    if (!(epsilon > 0.0)) throw ConfigError("--epsilon must be positive");
    if (epsilon < 1e-8 || epsilon > 1e-3) {
        err << "warning: epsilon " << epsilon
            << " is outside [1e-8, 1e-3]; the comparison will be dominated by "
            << (epsilon > 1e-3 ? "truncation" : "round-off") << " error\n";
    }
    const Pooling pool = parse_pooling(pooling);
    NetworkShape shape;
    shape.depth = depth;
    shape.latent_dim = latent_dim;
    shape.activation = parse_activation(activation);
    shape.pooling_slice = pool == Pooling::kTubeWise;
    const TransformMatrix m = make_transform(transform, dims.n3);
    // Larger init gain than training so every layer contributes a visible gradient.
    shape.init_gain = 1.0;
    const NetworkParams params = init_params(dims, shape, m, seed);
    const Tensor3 r = Tensor3::random_gaussian(dims, seed + 101, 1.0);
    const ObservationMask mask = random_missing_mask(dims, 0.5, seed + 202);

    GradientCheckOptions options;
    options.pooling = pool;
    options.epsilon = epsilon;
    options.corrupt_block = corrupt;
    const GradientCheckReport report = finite_difference_check(params, r, mask, options);

    std::ostringstream csv;
    csv << "block,entries,max_abs_error,max_rel_error,passed\n";
    for (const BlockCheck& b : report.blocks) {
        csv << b.block << ',' << b.entries << ',' << fmt_g17(b.max_abs_error) << ',' << fmt_g17(b.max_rel_error)
            << ',' << (b.passed ? "true" : "false") << "\n";
    }
    out << csv.str();
    if (out_dir) {
        fs::create_directories(*out_dir);
        write_text(*out_dir / "gradcheck.csv", csv.str());
    }
    return report.passed() ? kOk : kCheckFailed;
}

int cmd_eval(const fs::path& truth_path, const fs::path& estimate_path, const fs::path& mask_path,
             std::ostream& out) {
    const Tensor3 truth = read_tensor(truth_path);
    const Tensor3 estimate = read_tensor(estimate_path);
    const ObservationMask mask = read_mask(mask_path);
    if (truth.dims() != estimate.dims() || truth.dims() != mask.dims()) {
        throw ShapeError("shape mismatch: truth " + to_string(truth.dims()) + ", estimate " +
                         to_string(estimate.dims()) + ", mask " + to_string(mask.dims()));
    }
    out << fmt_fixed6(rmse(truth, estimate, mask.complement())) << "\n";
    return kOk;
}

int cmd_import(const std::string& kind, const fs::path& input, const fs::path& output,
               const std::optional<fs::path>& mask_out, std::size_t width, std::size_t height, std::size_t frames,
               std::size_t sensors, std::size_t intervals, std::size_t days, std::ostream& out) {
    if (kind == "frames") {
        if (width == 0 || height == 0 || frames == 0) throw ConfigError("frames import needs --width --height --frames");
        const auto raw = read_file_bytes(input);
        const auto planes = split_frames(raw, width, height, frames);
        write_tensor(frames_to_tensor(planes), output);
    } else if (kind == "traffic") {
        if (sensors == 0 || intervals == 0 || days == 0) {
            throw ConfigError("traffic import needs --sensors --intervals --days");
        }
        TrafficTable table = traffic_csv_to_tensor(input, sensors, intervals, days);
        // NaN marks missing-at-source cells so `complete` keeps them out of training and scoring.
        for (std::size_t i = 0; i < table.present.size(); ++i) {
            if (!table.present[i]) table.tensor.data()[i] = std::numeric_limits<double>::quiet_NaN();
        }
        write_tensor(table.tensor, output);
        if (mask_out) write_mask(table.present, *mask_out);
        out << "missing_at_source " << table.missing_at_source << "\n";
    } else if (kind == "image") {
        if (width == 0 || height == 0) throw ConfigError("image import needs --width --height");
        const auto raw = read_file_bytes(input);
        if (raw.size() != width * height * 3) {
            throw FormatError("image payload has " + std::to_string(raw.size()) + " bytes, expected " +
                              std::to_string(width * height * 3) + " (planar RGB)");
        }
        write_tensor(image_to_tensor(Image{width, height, 3, raw}), output);
    } else {
        throw ConfigError("unknown import kind '" + kind + "'");
    }
    return kOk;
}

}  // namespace

std::string report_csv(const RunReport& report) {
    std::ostringstream os;
    os << "epoch,train_loss,val_rmse,test_rmse\n";
    for (const EpochRecord& e : report.epochs) {
        os << e.epoch << ',' << fmt_g17(e.train_loss) << ',' << fmt_g17(e.val_rmse) << ',' << fmt_g17(e.test_rmse)
           << "\n";
    }
    return os.str();
}

std::string report_json(const RunReport& report) {
    ordered_json j;
    j["config"] = config_json(report.config);
    j["transform"] = report.transform_name;
    j["normalization"] = {{"offset", report.normalization.offset}, {"scale", report.normalization.scale}};
    j["train_count"] = report.train_count;
    j["validation_count"] = report.validation_count;
    j["epochs_run"] = report.epochs.empty() ? 0 : report.epochs.back().epoch;
    j["best_epoch"] = report.best_epoch;
    j["best_val_rmse"] = number_or_null(report.best_val_rmse);
    j["stopped_early"] = report.stopped_early;
    j["final_train_loss"] = report.epochs.empty() ? ordered_json(nullptr) : number_or_null(report.epochs.back().train_loss);
    j["final_test_rmse"] = report.final_test_rmse ? number_or_null(*report.final_test_rmse) : ordered_json(nullptr);
    return j.dump(2) + "\n";
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Tensor completion with a deep factorization network over the *_M product", "tubalnet"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    // complete
    CLI::App* complete = app.add_subcommand("complete", "Fill the unobserved entries of a tensor");
    std::string c_input, c_mask, c_truth, c_out = "out";
    double c_rate = 0.0;
    TrainFlags c_flags;
    complete->add_option("--input", c_input, "Input tensor (T3B1)")->required();
    auto* c_mask_opt = complete->add_option("--mask", c_mask, "Observation mask (T3M1)");
    auto* c_rate_opt = complete->add_option("--missing-rate", c_rate, "Hide this share of entries at random");
    c_mask_opt->excludes(c_rate_opt);
    complete->add_option("--truth", c_truth, "Ground truth for reporting RMSE on unobserved entries");
    complete->add_option("--out", c_out, "Output directory")->capture_default_str();
    add_train_flags(complete, c_flags);

    // synth
    CLI::App* synth = app.add_subcommand("synth", "Train on a generated low-tubal-rank tensor");
    std::string s_dims = "30x30x10", s_out = "out";
    std::size_t s_rank = 3;
    double s_rate = 0.5;
    TrainFlags s_flags;
    synth->add_option("--dims", s_dims, "Tensor size N1xN2xN3")->capture_default_str();
    synth->add_option("--rank", s_rank, "Tubal rank of the generator")->capture_default_str();
    synth->add_option("--missing-rate", s_rate, "Share of entries held out")->capture_default_str();
    synth->add_option("--out", s_out, "Output directory")->capture_default_str();
    add_train_flags(synth, s_flags);

    // gradcheck
    CLI::App* grad = app.add_subcommand("gradcheck", "Compare analytic gradients with central differences");
    std::string g_dims = "4x5x3", g_act{to_string(Activation::kTanh)}, g_pool{to_string(Pooling::kStacked)},
                g_transform = "dct", g_corrupt, g_out;
    std::size_t g_depth = 3, g_latent = 3;
    std::uint64_t g_seed = 0;
    double g_eps = 1e-5;
    grad->add_option("--dims", g_dims, "Tensor size N1xN2xN3, each <= 8")->capture_default_str();
    grad->add_option("--depth", g_depth, "Layers per branch (>= 2)")->capture_default_str();
    grad->add_option("--latent-dim", g_latent, "Latent slice count m")->capture_default_str();
    grad->add_option("--seed", g_seed, "Random seed")->capture_default_str();
    grad->add_option("--epsilon", g_eps, "Relative finite-difference step")->capture_default_str();
    grad->add_option("--activation", g_act, "sigmoid | relu | tanh | linear")->capture_default_str();
    grad->add_option("--pooling", g_pool, "stacked | tube-wise")->capture_default_str();
    grad->add_option("--transform", g_transform, "dct | identity | rand-orth:<seed>")->capture_default_str();
    auto* g_corrupt_opt = grad->add_option("--corrupt", g_corrupt, "Debug: perturb the analytic gradient of this block");
    auto* g_out_opt = grad->add_option("--out", g_out, "Also write gradcheck.csv into this directory");

    // eval
    CLI::App* eval = app.add_subcommand("eval", "RMSE of an estimate over the entries outside a mask");
    std::string e_truth, e_estimate, e_mask;
    eval->add_option("--truth", e_truth, "Ground truth (T3B1)")->required();
    eval->add_option("--estimate", e_estimate, "Estimate (T3B1)")->required();
    eval->add_option("--mask", e_mask, "Observation mask (T3M1); RMSE is taken over its complement")->required();

    // import
    CLI::App* import = app.add_subcommand("import", "Convert raw data into a T3B1 tensor");
    std::string i_kind, i_input, i_output, i_mask;
    std::size_t i_width = 0, i_height = 0, i_frames = 0, i_sensors = 0, i_intervals = 0, i_days = 0;
    import->add_option("--kind", i_kind, "image | frames | traffic")->required()->check(
        CLI::IsMember({"image", "frames", "traffic"}));
    import->add_option("--input", i_input, "Raw input file")->required();
    import->add_option("--output", i_output, "Output tensor (T3B1)")->required();
    auto* i_mask_opt = import->add_option("--mask-out", i_mask, "traffic: write the present-cell mask (T3M1)");
    import->add_option("--width", i_width, "image/frames: width in pixels");
    import->add_option("--height", i_height, "image/frames: height in pixels");
    import->add_option("--frames", i_frames, "frames: number of 8-bit planes in the input");
    import->add_option("--sensors", i_sensors, "traffic: rows in the CSV");
    import->add_option("--intervals", i_intervals, "traffic: time intervals per day");
    import->add_option("--days", i_days, "traffic: number of days");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        // Help requests exit 0 and print the help of the selected subcommand.
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kInputError;
    }

    Manifest manifest;
    manifest.argv.push_back("tubalnet");
    manifest.argv.insert(manifest.argv.end(), args.begin(), args.end());
    try {
        if (complete->parsed()) {
            manifest.subcommand = "complete";
            std::optional<fs::path> mask;
            std::optional<double> rate;
            std::optional<fs::path> truth;
            if (c_mask_opt->count() > 0) mask = c_mask;
            if (c_rate_opt->count() > 0) rate = c_rate;
            if (!c_truth.empty()) truth = c_truth;
            return cmd_complete(c_input, mask, rate, truth, c_out, c_flags.resolve(), manifest, out);
        }
        if (synth->parsed()) {
            manifest.subcommand = "synth";
            return cmd_synth(parse_dims(s_dims), s_rank, s_rate, s_out, s_flags.resolve(), manifest, out);
        }
        if (grad->parsed()) {
            std::optional<std::string> corrupt;
            std::optional<fs::path> out_dir;
            if (g_corrupt_opt->count() > 0) corrupt = g_corrupt;
            if (g_out_opt->count() > 0) out_dir = g_out;
            return cmd_gradcheck(parse_dims(g_dims), g_depth, g_latent, g_seed, g_eps, g_act, g_pool, g_transform,
                                 corrupt, out_dir, out, err);
        }
        if (eval->parsed()) return cmd_eval(e_truth, e_estimate, e_mask, out);
        if (import->parsed()) {
            std::optional<fs::path> mask_out;
            if (i_mask_opt->count() > 0) mask_out = i_mask;
            return cmd_import(i_kind, i_input, i_output, mask_out, i_width, i_height, i_frames, i_sensors,
                              i_intervals, i_days, out);
        }
    } catch (const DivergenceError& e) {
        err << "error: " << e.what() << "\n";
        return kDiverged;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kInputError;
    }
    return kInputError;
}

int run(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args, std::cout, std::cerr);
}

}  // namespace tubalnet::cli
