#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "support/oracles.hpp"
#include "tubalnet/cli.hpp"
#include "tubalnet/data_io.hpp"
#include "tubalnet/transform.hpp"

namespace tubalnet {
namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run_cli(const std::vector<std::string>& args) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> rows;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) rows.push_back(line);
    return rows;
}

std::vector<std::string> split(const std::string& row, char sep) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(row);
    while (std::getline(in, cell, sep)) cells.push_back(cell);
    if (!row.empty() && row.back() == sep) cells.emplace_back();
    return cells;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Small, fast training run: a rank-2 tensor with a few epochs.
void write_small_input(const oracle::TempDir& dir) {
    const Tensor3 x = make_synthetic_low_rank({6, 5, 3}, 2, 11, dct_transform(3));
    write_tensor(x, dir / "x.t3b");
}

const std::vector<std::string> kQuick = {"--epochs", "30", "--latent-dim", "4", "--patience", "0"};

std::vector<std::string> with_quick(std::vector<std::string> args) {
    args.insert(args.end(), kQuick.begin(), kQuick.end());
    return args;
}

TEST(Cli, HelpListsTrainingDefaults) {
    const TrainConfig defaults;
    for (const std::string sub : {"complete", "synth"}) {
        const Outcome o = run_cli({sub, "--help"});
        EXPECT_EQ(o.code, cli::kOk) << sub;
        EXPECT_NE(o.out.find("--epochs"), std::string::npos);
        EXPECT_NE(o.out.find(std::to_string(defaults.epochs)), std::string::npos) << o.out;
        EXPECT_NE(o.out.find("--lr"), std::string::npos);
        EXPECT_NE(o.out.find("--transform"), std::string::npos);
        EXPECT_NE(o.out.find(defaults.transform), std::string::npos);
        EXPECT_NE(o.out.find("--no-normalize"), std::string::npos);
    }
    const Outcome g = run_cli({"gradcheck", "--help"});
    EXPECT_EQ(g.code, cli::kOk);
    EXPECT_NE(g.out.find("--epsilon"), std::string::npos);
    EXPECT_NE(g.out.find("1e-05"), std::string::npos) << g.out;
}

TEST(Cli, UnknownSubcommandOrFlagIsInputError) {
    EXPECT_EQ(run_cli({"frobnicate"}).code, cli::kInputError);
    EXPECT_EQ(run_cli({"eval", "--bogus"}).code, cli::kInputError);
    EXPECT_EQ(run_cli({}).code, cli::kInputError);
}

TEST(Cli, CompletePrintsLastReportedTestRmse) {
    const oracle::TempDir dir("cli_complete");
    write_small_input(dir);
    const auto out = (dir / "run").string();
    const Outcome o =
        run_cli(with_quick({"complete", "--input", (dir / "x.t3b").string(), "--missing-rate", "0.5", "--out", out}));
    ASSERT_EQ(o.code, cli::kOk) << o.err;
    const auto printed = lines(o.out);
    ASSERT_EQ(printed.size(), 2u) << o.out;
    ASSERT_EQ(printed[0].rfind("test_rmse ", 0), 0u);
    const std::string value = printed[0].substr(10);

    const auto csv = lines(slurp(dir.path() / "run" / "report.csv"));
    ASSERT_GE(csv.size(), 2u);
    EXPECT_EQ(csv.front(), "epoch,train_loss,val_rmse,test_rmse");
    EXPECT_EQ(split(csv.back(), ',').back(), value);
    EXPECT_EQ(printed[1], "epochs " + split(csv.back(), ',').front());
    EXPECT_EQ(printed[1], "epochs 30");

    for (const char* name : {"mask.t3m", "completed.t3b", "report.csv", "report.json", "manifest.json"})
        EXPECT_TRUE(std::filesystem::exists(dir.path() / "run" / name)) << name;

    // The printed value is the RMSE of completed.t3b on the held-out entries.
    const Tensor3 truth = read_tensor(dir / "x.t3b");
    const Tensor3 completed = read_tensor(dir.path() / "run" / "completed.t3b");
    const ObservationMask mask = read_mask(dir.path() / "run" / "mask.t3m");
    EXPECT_EQ(mask.count(), 45u);
    EXPECT_EQ(fmt(oracle::rmse(truth, completed, mask.complement())), value);
    for (std::size_t i = 0; i < truth.data().size(); ++i)
        if (mask[i]) {
            EXPECT_EQ(completed.data()[i], truth.data()[i]);
        }

    const Outcome e = run_cli({"eval", "--truth", (dir / "x.t3b").string(), "--estimate",
                               (dir.path() / "run" / "completed.t3b").string(), "--mask",
                               (dir.path() / "run" / "mask.t3m").string()});
    ASSERT_EQ(e.code, cli::kOk) << e.err;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f\n", std::strtod(value.c_str(), nullptr));
    EXPECT_EQ(e.out, buf);
}

TEST(Cli, CompleteRerunIsByteIdentical) {
    const oracle::TempDir dir("cli_rerun");
    write_small_input(dir);
    for (const char* run : {"a", "b"}) {
        const Outcome o = run_cli(with_quick({"complete", "--input", (dir / "x.t3b").string(), "--missing-rate",
                                              "0.5", "--seed", "7", "--out", (dir / run).string()}));
        ASSERT_EQ(o.code, cli::kOk) << o.err;
    }
    for (const char* name : {"mask.t3m", "completed.t3b", "report.csv", "report.json"})
        EXPECT_EQ(slurp(dir.path() / "a" / name), slurp(dir.path() / "b" / name)) << name;
}

TEST(Cli, CompleteWithMaskFile) {
    const oracle::TempDir dir("cli_mask");
    write_small_input(dir);
    ObservationMask mask({6, 5, 3}, true);
    for (std::size_t i = 0; i < mask.size(); i += 3) mask.set(i, false);
    write_mask(mask, dir / "m.t3m");
    const Outcome o = run_cli(with_quick({"complete", "--input", (dir / "x.t3b").string(), "--mask",
                                          (dir / "m.t3m").string(), "--out", (dir / "run").string()}));
    ASSERT_EQ(o.code, cli::kOk) << o.err;
    EXPECT_EQ(read_mask(dir.path() / "run" / "mask.t3m"), mask);

    EXPECT_EQ(run_cli({"complete", "--input", (dir / "x.t3b").string(), "--mask", (dir / "m.t3m").string(),
                       "--missing-rate", "0.5"})
                  .code,
              cli::kInputError);
    write_mask(ObservationMask({6, 5, 2}, true), dir / "bad.t3m");
    EXPECT_EQ(run_cli({"complete", "--input", (dir / "x.t3b").string(), "--mask", (dir / "bad.t3m").string(),
                       "--out", (dir / "bad").string()})
                  .code,
              cli::kInputError);
}

TEST(Cli, CompleteWithoutHeldOutPrintsEpochsOnly) {
    const oracle::TempDir dir("cli_full");
    write_small_input(dir);
    const Outcome o =
        run_cli(with_quick({"complete", "--input", (dir / "x.t3b").string(), "--out", (dir / "run").string()}));
    ASSERT_EQ(o.code, cli::kOk) << o.err;
    EXPECT_EQ(o.out, "epochs 30\n");
}

TEST(Cli, FormatErrorsAreInputErrors) {
    const oracle::TempDir dir("cli_format");
    std::ofstream(dir / "junk.t3b", std::ios::binary) << "NOPE0000";
    const Outcome o = run_cli({"complete", "--input", (dir / "junk.t3b").string(), "--out", (dir / "o").string()});
    EXPECT_EQ(o.code, cli::kInputError);
    EXPECT_NE(o.err.find("error:"), std::string::npos);
    EXPECT_EQ(run_cli({"complete", "--input", (dir / "missing.t3b").string()}).code, cli::kInputError);

    write_small_input(dir);
    EXPECT_EQ(run_cli({"complete", "--input", (dir / "x.t3b").string(), "--activation", "softplus", "--out",
                       (dir / "o").string()})
                  .code,
              cli::kInputError);
    EXPECT_EQ(run_cli({"complete", "--input", (dir / "x.t3b").string(), "--transform", "fft", "--out",
                       (dir / "o").string()})
                  .code,
              cli::kInputError);
    EXPECT_EQ(run_cli({"synth", "--dims", "3x3", "--out", (dir / "o").string()}).code, cli::kInputError);
}

TEST(Cli, DivergenceExitsThree) {
    const oracle::TempDir dir("cli_diverge");
    write_small_input(dir);
    const Outcome o = run_cli({"complete", "--input", (dir / "x.t3b").string(), "--missing-rate", "0.3", "--lr",
                               "1e300", "--epochs", "50", "--out", (dir / "run").string()});
    EXPECT_EQ(o.code, cli::kDiverged) << o.out << o.err;
    EXPECT_NE(o.err.find("error:"), std::string::npos);
}

TEST(Cli, SynthWithoutMissingReportsTrainRmseOnly) {
    const oracle::TempDir dir("cli_synth0");
    const Outcome o = run_cli(with_quick(
        {"synth", "--dims", "6x6x3", "--rank", "2", "--missing-rate", "0", "--out", (dir / "s").string()}));
    ASSERT_EQ(o.code, cli::kOk) << o.err;
    const auto rows = lines(o.out);
    ASSERT_EQ(rows.size(), 2u) << o.out;
    EXPECT_EQ(rows[0], "dims,rank,missing_rate,seed,epochs,train_rmse,test_rmse,meanfill_rmse,ratio");
    const auto cells = split(rows[1], ',');
    ASSERT_EQ(cells.size(), 9u) << rows[1];
    EXPECT_EQ(cells[0], "6x6x3");
    EXPECT_EQ(cells[4], "30");
    EXPECT_GT(std::strtod(cells[5].c_str(), nullptr), 0.0);
    EXPECT_EQ(cells[6], "");
    EXPECT_EQ(cells[7], "");
    EXPECT_EQ(cells[8], "");
    EXPECT_EQ(slurp(dir.path() / "s" / "synth.csv"), o.out);
}

TEST(Cli, SynthWithMissingReportsRatio) {
    const oracle::TempDir dir("cli_synth");
    const Outcome o = run_cli(with_quick(
        {"synth", "--dims", "6x6x3", "--rank", "2", "--missing-rate", "0.5", "--out", (dir / "s").string()}));
    ASSERT_EQ(o.code, cli::kOk) << o.err;
    const auto cells = split(lines(o.out).at(1), ',');
    ASSERT_EQ(cells.size(), 9u);
    const double test = std::strtod(cells[6].c_str(), nullptr);
    const double mean = std::strtod(cells[7].c_str(), nullptr);
    EXPECT_NEAR(std::strtod(cells[8].c_str(), nullptr), test / mean, 1e-15);

    const Tensor3 truth = read_tensor(dir.path() / "s" / "truth.t3b");
    const Tensor3 completed = read_tensor(dir.path() / "s" / "completed.t3b");
    const ObservationMask mask = read_mask(dir.path() / "s" / "mask.t3m");
    EXPECT_EQ(fmt(oracle::rmse(truth, completed, mask.complement())), cells[6]);
}

TEST(Cli, GradcheckDefaultsPass) {
    const oracle::TempDir dir("cli_grad");
    const Outcome o = run_cli({"gradcheck", "--out", dir.path().string()});
    EXPECT_EQ(o.code, cli::kOk) << o.out << o.err;
    EXPECT_TRUE(o.err.empty()) << o.err;
    const auto rows = lines(o.out);
    ASSERT_GE(rows.size(), 2u);
    EXPECT_EQ(rows[0], "block,entries,max_abs_error,max_rel_error,passed");
    for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(split(rows[i], ',').back(), "true") << rows[i];
    EXPECT_EQ(slurp(dir / "gradcheck.csv"), o.out);
}

TEST(Cli, GradcheckWarnsOnCoarseEpsilon) {
    const Outcome o = run_cli({"gradcheck", "--epsilon", "1e-1"});
    EXPECT_NE(o.err.find("truncation"), std::string::npos) << o.err;
    const Outcome fine = run_cli({"gradcheck", "--epsilon", "1e-12"});
    EXPECT_NE(fine.err.find("round-off"), std::string::npos) << fine.err;
}

TEST(Cli, GradcheckCorruptedBlockFails) {
    const Outcome ok = run_cli({"gradcheck"});
    ASSERT_EQ(ok.code, cli::kOk);
    const std::string block = split(lines(ok.out).at(1), ',').front();
    const Outcome o = run_cli({"gradcheck", "--corrupt", block});
    EXPECT_EQ(o.code, cli::kCheckFailed) << o.out;
    for (const auto& row : lines(o.out)) {
        const auto cells = split(row, ',');
        if (cells.front() == "block") continue;
        EXPECT_EQ(cells.back(), cells.front() == block ? "false" : "true") << row;
    }
}

TEST(Cli, GradcheckRejectsLargeDims) {
    EXPECT_EQ(run_cli({"gradcheck", "--dims", "9x4x3"}).code, cli::kInputError);
}

TEST(Cli, EvalIdentityAndMismatch) {
    const oracle::TempDir dir("cli_eval");
    const Tensor3 x = Tensor3::random_gaussian({3, 4, 2}, 5);
    write_tensor(x, dir / "x.t3b");
    ObservationMask mask({3, 4, 2}, false);
    mask.set(0, true);
    write_mask(mask, dir / "m.t3m");
    const Outcome same = run_cli({"eval", "--truth", (dir / "x.t3b").string(), "--estimate",
                                  (dir / "x.t3b").string(), "--mask", (dir / "m.t3m").string()});
    EXPECT_EQ(same.code, cli::kOk) << same.err;
    EXPECT_EQ(same.out, "0.000000\n");

    write_tensor(Tensor3::random_gaussian({3, 4, 3}, 5), dir / "y.t3b");
    const Outcome bad = run_cli({"eval", "--truth", (dir / "x.t3b").string(), "--estimate",
                                 (dir / "y.t3b").string(), "--mask", (dir / "m.t3m").string()});
    EXPECT_EQ(bad.code, cli::kInputError);
}

TEST(Cli, ImportImageRoundTrips) {
    const oracle::TempDir dir("cli_import");
    std::vector<std::uint8_t> raw(2 * 3 * 3);
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = static_cast<std::uint8_t>(i * 13);
    write_file_bytes(dir / "img.rgb", raw);
    const Outcome o = run_cli({"import", "--kind", "image", "--input", (dir / "img.rgb").string(), "--output",
                               (dir / "img.t3b").string(), "--width", "3", "--height", "2"});
    ASSERT_EQ(o.code, cli::kOk) << o.err;
    const Tensor3 t = read_tensor(dir / "img.t3b");
    EXPECT_EQ(t.dims(), (Dims{2, 3, 3}));
    EXPECT_EQ(run_cli({"import", "--kind", "image", "--input", (dir / "img.rgb").string(), "--output",
                       (dir / "img.t3b").string(), "--width", "4", "--height", "2"})
                  .code,
              cli::kInputError);
}

TEST(Cli, BinaryMatchesInProcessRun) {
    const oracle::TempDir dir("cli_binary");
    const std::string cmd = std::string(TUBALNET_CLI_PATH) + " eval --truth nope > " + (dir / "o").string() +
                            " 2> " + (dir / "e").string();
    const int status = std::system(cmd.c_str());
    ASSERT_NE(status, -1);
    EXPECT_EQ(WEXITSTATUS(status), cli::kInputError);
}

TEST(Cli, TrafficImportMarksMissingCellsAsNan) {
    const oracle::TempDir dir("cli_traffic");
    // 2 sensors, 2 intervals, 2 days; one empty cell.
    std::ofstream(dir / "t.csv") << "1,2,3,4\n5,,7,8\n";
    const Outcome o = run_cli({"import", "--kind", "traffic", "--input", (dir / "t.csv").string(), "--output",
                               (dir / "t.t3b").string(), "--mask-out", (dir / "p.t3m").string(), "--sensors", "2",
                               "--intervals", "2", "--days", "2"});
    ASSERT_EQ(o.code, cli::kOk) << o.err;
    EXPECT_EQ(o.out, "missing_at_source 1\n");
    const Tensor3 t = read_tensor(dir / "t.t3b");
    EXPECT_TRUE(std::isnan(t(1, 1, 0)));
    EXPECT_EQ(t(1, 0, 1), 7.0);
    EXPECT_EQ(t(0, 1, 1), 4.0);
    const ObservationMask present = read_mask(dir / "p.t3m");
    EXPECT_EQ(present.count(), 7u);
    EXPECT_FALSE(present[t.dims().offset(1, 1, 0)]);

    const Outcome c = run_cli(with_quick({"complete", "--input", (dir / "t.t3b").string(), "--missing-rate", "0.25",
                                          "--out", (dir / "run").string()}));
    ASSERT_EQ(c.code, cli::kOk) << c.err;
    const ObservationMask used = read_mask(dir.path() / "run" / "mask.t3m");
    EXPECT_FALSE(used[t.dims().offset(1, 1, 0)]);
    EXPECT_EQ(used.intersect(present), used);
    const Tensor3 completed = read_tensor(dir.path() / "run" / "completed.t3b");
    for (double v : completed.data()) EXPECT_TRUE(std::isfinite(v));
}

}  // namespace
}  // namespace tubalnet
