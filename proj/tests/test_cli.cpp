#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sgdlab/experiments.hpp"

using namespace sgdlab;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("sgdlab-test-" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

fs::path write_file(const fs::path& dir, const std::string& name, const std::string& text) {
    const fs::path path = dir / name;
    std::ofstream out(path, std::ios::binary);
    out << text;
    return path;
}

}  // namespace

TEST_CASE("key-value parser handles sections, comments, and errors") {
    const std::string text =
        "# comment\n"
        "experiment = lemmas\n"
        "\n"
        "[spectrum]\n"
        "c = 0.25\n"
        "d = 40\n"
        "; another comment\n"
        "[run]\n"
        "betas = 0.0, 1.0\n";
    const KeyValueConfig cfg = KeyValueConfig::parse_string(text, "test.conf");
    CHECK(cfg.get_string("experiment", "") == "lemmas");
    CHECK(cfg.get_double("spectrum.c", 0.0) == 0.25);
    CHECK(cfg.get_int("spectrum.d", 0) == 40);
    CHECK(cfg.get_double_list("run.betas", {}) == std::vector<double>{0.0, 1.0});
    CHECK(cfg.get_double("spectrum.p", 2.5) == 2.5);  // fallback

    CHECK_THROWS_WITH_AS(KeyValueConfig::parse_string("just a line\n", "bad.conf"),
                         doctest::Contains("bad.conf:1"), ConfigError);
    CHECK_THROWS_AS(KeyValueConfig::parse_string("[open\n", "bad.conf"), ConfigError);
    CHECK_THROWS_AS(KeyValueConfig::parse_string("a = 1\na = 2\n", "bad.conf"), ConfigError);
    const KeyValueConfig typed = KeyValueConfig::parse_string("x = abc\n", "bad.conf");
    CHECK_THROWS_AS(typed.get_double("x", 0.0), ConfigError);
}

TEST_CASE("experiment config validation cites the violated precondition") {
    const std::string text =
        "experiment = sgd-rate\n"
        "[run]\n"
        "gamma = -1\n";
    const KeyValueConfig raw = KeyValueConfig::parse_string(text, "neg.conf");
    CHECK_THROWS_WITH_AS(ExperimentConfig::from_config(raw, {}),
                         doctest::Contains("gamma must be > 0"), ConfigError);

    const KeyValueConfig unknown = KeyValueConfig::parse_string(
        "experiment = lemmas\n[run]\ntypo_key = 3\n", "typo.conf");
    CHECK_THROWS_WITH_AS(ExperimentConfig::from_config(unknown, {}),
                         doctest::Contains("unknown key"), ConfigError);

    const KeyValueConfig missing = KeyValueConfig::parse_string("seed = 4\n", "none.conf");
    CHECK_THROWS_AS(ExperimentConfig::from_config(missing, {}), ConfigError);

    const KeyValueConfig both = KeyValueConfig::parse_string(
        "experiment = as-convergence\n[run]\ngamma = 0.1\ngamma_bound_fraction = 1.0\n",
        "both.conf");
    CHECK_THROWS_AS(ExperimentConfig::from_config(both, {}), ConfigError);
}

TEST_CASE("cli overrides beat file keys") {
    const KeyValueConfig raw = KeyValueConfig::parse_string(
        "experiment = mean-rate\nseed = 7\n[run]\nn_steps = 500\n", "ovr.conf");
    CliOverrides overrides;
    overrides.seed = 99;
    overrides.steps = 750;
    overrides.replicas = 3;
    const ExperimentConfig cfg = ExperimentConfig::from_config(raw, overrides);
    CHECK(cfg.seed == 99);
    CHECK(cfg.n_steps == 750);
    CHECK(cfg.n_replicas == 3);
}

TEST_CASE("mean-rate experiment runs, asserts, and reproduces byte-identical output") {
    const fs::path dir = temp_dir("mean-rate");
    const std::string conf =
        "experiment = mean-rate\n"
        "seed = 11\n"
        "[spectrum]\n"
        "d = 400\n"
        "[run]\n"
        "n_steps = 2000\n"
        "window = 50, 2000\n";
    const KeyValueConfig raw = KeyValueConfig::parse_string(conf, "mr.conf");

    CliOverrides first;
    first.out_dir = (dir / "a").string();
    const RunOutcome a = run_experiment(ExperimentConfig::from_config(raw, first));
    CHECK(a.exit_code == 0);
    CHECK(fs::exists(a.csv_path));
    CHECK(fs::exists(a.manifest_path));

    CliOverrides second;
    second.out_dir = (dir / "b").string();
    const RunOutcome b = run_experiment(ExperimentConfig::from_config(raw, second));
    CHECK(read_file(a.csv_path) == read_file(b.csv_path));

    const std::string csv = read_file(a.csv_path);
    CHECK(csv.rfind("n,beta,mean,stderr,bound,replicas\n", 0) == 0);
    CHECK(csv.find("# fitted_exponent:") != std::string::npos);
    CHECK(csv.find("# experiment: mean-rate") != std::string::npos);
}

TEST_CASE("stochastic experiments reproduce byte-identical CSVs") {
    const fs::path dir = temp_dir("repro");
    const std::string conf =
        "experiment = assumption3\n"
        "seed = 21\n"
        "[spectrum]\n"
        "d = 12\n"
        "[run]\n"
        "n_samples = 2000\n"
        "beta = 0.3\n";
    const KeyValueConfig raw = KeyValueConfig::parse_string(conf, "a3.conf");
    CliOverrides first, second;
    first.out_dir = (dir / "a").string();
    second.out_dir = (dir / "b").string();
    const RunOutcome a = run_experiment(ExperimentConfig::from_config(raw, first));
    const RunOutcome b = run_experiment(ExperimentConfig::from_config(raw, second));
    CHECK(a.exit_code == 0);
    CHECK(read_file(a.csv_path) == read_file(b.csv_path));
}

TEST_CASE("recursion experiment passes for the exact and sampled paths") {
    const fs::path dir = temp_dir("recursion");
    for (const char* sampler : {"coordinate-bounded", "gff"}) {
        const std::string conf = std::string("experiment = recursion\nseed = 5\n") +
                                 "[spectrum]\nd = 50\n[run]\nsampler = " + sampler +
                                 "\nn_samples = 20000\n";
        const KeyValueConfig raw = KeyValueConfig::parse_string(conf, "rc.conf");
        CliOverrides overrides;
        overrides.out_dir = (dir / sampler).string();
        const RunOutcome out = run_experiment(ExperimentConfig::from_config(raw, overrides));
        CHECK(out.exit_code == 0);
    }
}

TEST_CASE("as-convergence experiment contracts below the boundary") {
    const fs::path dir = temp_dir("asc");
    const std::string conf =
        "experiment = as-convergence\n"
        "seed = 3\n"
        "[run]\n"
        "gamma_bound_fraction = 0.75\n"
        "n_steps = 20000\n"
        "n_replicas = 10\n";
    const KeyValueConfig raw = KeyValueConfig::parse_string(conf, "asc.conf");
    CliOverrides overrides;
    overrides.out_dir = dir.string();
    const RunOutcome out = run_experiment(ExperimentConfig::from_config(raw, overrides));
    CHECK(out.exit_code == 0);
}

TEST_CASE("reduced lemma suite is green") {
    const fs::path dir = temp_dir("lemmas");
    const std::string conf =
        "experiment = lemmas\n"
        "seed = 1\n"
        "[spectrum]\n"
        "d = 30\n"
        "[run]\n"
        "n_samples = 4000\n";
    const KeyValueConfig raw = KeyValueConfig::parse_string(conf, "lm.conf");
    CliOverrides overrides;
    overrides.out_dir = dir.string();
    const RunOutcome out = run_experiment(ExperimentConfig::from_config(raw, overrides));
    CHECK(out.exit_code == 0);
    const std::string csv = read_file(out.csv_path);
    CHECK(csv.rfind("check,points,violations,worst_margin,value,reference,stderr\n", 0) == 0);
    CHECK(csv.find("holder-interpolation") != std::string::npos);
    CHECK(csv.find("series-kappa1-identity") != std::string::npos);
}

TEST_CASE("plotdata transforms the canonical schema") {
    const fs::path dir = temp_dir("plot");

    // three-column form: deterministic series with a bound column
    const fs::path det = write_file(dir, "det.csv",
                                    "n,beta,mean,stderr,bound,replicas\n"
                                    "0,0.5,1,0,,1\n"
                                    "10,0.5,0.25,0,0.5,1\n"
                                    "100,0.5,0.01,0,0.1,1\n"
                                    "# experiment: mean-rate\n");
    std::string error;
    CHECK(emit_plotdata(det, std::nullopt, std::nullopt, error) == 0);
    const std::string plot = read_file(dir / "det.plot");
    CHECK(plot.find("# experiment: mean-rate\n") == 0);
    CHECK(plot.find("log10_n log10_mean log10_bound") != std::string::npos);
    CHECK(plot.find("\n1 ") != std::string::npos);  // log10(10) = 1

    // four-column form once a standard error band is present
    const fs::path mc = write_file(dir, "mc.csv",
                                   "n,beta,mean,stderr,bound,replicas\n"
                                   "10,0,0.5,0.01,0.4,100\n"
                                   "100,0,0.05,0.002,0.04,100\n"
                                   "# experiment: sgd-rate\n");
    CHECK(emit_plotdata(mc, std::nullopt, std::nullopt, error) == 0);
    const std::string band = read_file(dir / "mc.plot");
    CHECK(band.find("log10_n log10_mean log10_lo log10_hi") != std::string::npos);

    // failure modes: wrong header, no data rows
    const fs::path bad = write_file(dir, "bad.csv", "x,y\n1,2\n");
    CHECK(emit_plotdata(bad, std::nullopt, std::nullopt, error) == 2);
    CHECK(error.find("missing columns") != std::string::npos);

    const fs::path empty = write_file(dir, "empty.csv", "n,beta,mean,stderr,bound,replicas\n");
    CHECK(emit_plotdata(empty, std::nullopt, std::nullopt, error) == 2);
    CHECK(error.find("empty") != std::string::npos);
}

TEST_CASE("environment variable supplies the default output directory") {
    const fs::path dir = temp_dir("envout");
    setenv("SGDLAB_OUT", dir.c_str(), 1);
    const KeyValueConfig raw = KeyValueConfig::parse_string(
        "experiment = assumption3\nseed = 2\n[spectrum]\nd = 8\n[run]\nn_samples = 500\n",
        "env.conf");
    const ExperimentConfig cfg = ExperimentConfig::from_config(raw, {});
    unsetenv("SGDLAB_OUT");
    CHECK(cfg.out_dir == dir);
}

TEST_CASE("command line binary round trip") {
    const fs::path dir = temp_dir("cli");
    const fs::path conf = write_file(dir, "exp.conf",
                                     "experiment = assumption3\n"
                                     "seed = 9\n"
                                     "[spectrum]\n"
                                     "d = 10\n"
                                     "[run]\n"
                                     "n_samples = 1000\n");
    const std::string exe = SGDLAB_CLI_PATH;

    const int ok = std::system(
        (exe + " run " + conf.string() + " --out " + (dir / "out").string() + " > /dev/null")
            .c_str());
    CHECK(WEXITSTATUS(ok) == 0);
    CHECK(fs::exists(dir / "out" / "assumption3-results.csv"));

    const int plot = std::system(
        (exe + " plotdata " + (dir / "out" / "assumption3-results.csv").string() +
         " > /dev/null 2>&1")
            .c_str());
    CHECK(WEXITSTATUS(plot) == 0);

    const int missing =
        std::system((exe + " run /nonexistent.conf > /dev/null 2>&1").c_str());
    CHECK(WEXITSTATUS(missing) == 2);

    const fs::path bad = write_file(dir, "bad.conf",
                                    "experiment = sgd-rate\n[run]\ngamma = -1\n");
    const int invalid =
        std::system((exe + " run " + bad.string() + " > /dev/null 2>&1").c_str());
    CHECK(WEXITSTATUS(invalid) == 2);
}
