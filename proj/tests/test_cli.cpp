#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

std::string bin() {
    const char* b = std::getenv("ILED_BIN");
    REQUIRE_MESSAGE(b != nullptr, "ILED_BIN must point at the iled binary");
    return b;
}

int run(const std::string& args) {
    const std::string cmd = bin() + " " + args + " > cli_stdout.txt 2> cli_stderr.txt";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

std::vector<char> slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return std::vector<char>((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

void write_tiny_fhn_config(const std::string& path, int epochs) {
    std::ofstream os(path, std::ios::trunc);
    os << "system = \"fhn\"\nseed = 1\n"
       << "[fhn]\nn_train = 2\nn_val = 1\ntraj_seconds = 60.0\ntest_seconds = 120.0\nwarmup_seconds = 40.0\n"
       << "[model]\nd_z = 2\nd_h = 8\npsi1_hidden = [8, 8]\npsi2_hidden = [4]\n"
       << "[train]\nwindow = 16\nbatch = 4\nepochs = " << epochs << "\nwindows_per_traj = 2\n"
       << "[scan]\ndims = [1, 2]\nepochs = 3\nbatches_per_epoch = 4\nbatch = 4\n";
}

}  // namespace

TEST_CASE("missing or malformed configs exit with code 2") {
    CHECK(run("gen-data --config does_not_exist.toml --out cli_x") == 2);

    std::ofstream os("bad_key.toml");
    os << "system = \"fhn\"\n[train]\nnot_a_real_key = 3\n";
    os.close();
    CHECK(run("gen-data --config bad_key.toml --out cli_x") == 2);

    std::ofstream os2("bad_type.toml");
    os2 << "system = \"fhn\"\n[train]\nepochs = \"ten\"\n";
    os2.close();
    CHECK(run("train --config bad_type.toml --data nowhere --out cli_x") == 2);
}

TEST_CASE("gen-data / train / rollout / analyze pipeline with exit-code contract") {
    fs::remove_all("cli_ds");
    fs::remove_all("cli_run");
    write_tiny_fhn_config("tiny.toml", 2);

    CHECK(run("gen-data --config tiny.toml --out cli_ds --threads 2") == 0);
    CHECK(fs::exists("cli_ds/meta.json"));
    // rerun without --force -> config error
    CHECK(run("gen-data --config tiny.toml --out cli_ds") == 2);
    CHECK(run("gen-data --config tiny.toml --out cli_ds --force") == 0);

    CHECK(run("train --config tiny.toml --data cli_ds --out cli_run --threads 2") == 0);
    CHECK(fs::exists("cli_run/best.ckpt"));
    CHECK(fs::exists("cli_run/training_log.csv"));
    CHECK(fs::exists("cli_run/config.json"));
    CHECK(run("train --config tiny.toml --data cli_ds --out cli_run") == 2);  // no --force

    // rollout: bounded horizon with truth columns; horizon 0 = reconstruction only
    CHECK(run("rollout --checkpoint cli_run/best.ckpt --data cli_ds --horizon 40 --out cli_roll.csv") == 0);
    {
        std::ifstream is("cli_roll.csv");
        std::string header;
        std::getline(is, header);
        CHECK(header.find("t,z_1,z_2,h_1") == 0);
        CHECK(header.find("norm_Az") != std::string::npos);
        CHECK(header.find("phi_hat_0") != std::string::npos);
        int rows = 0;
        std::string line;
        while (std::getline(is, line)) ++rows;
        CHECK(rows == 41);
    }
    CHECK(run("rollout --checkpoint cli_run/best.ckpt --data cli_ds --horizon 0 --out cli_roll0.csv") == 0);
    {
        std::ifstream is("cli_roll0.csv");
        std::string line;
        int rows = -1;  // minus header
        while (std::getline(is, line)) ++rows;
        CHECK(rows == 1);
    }

    // insufficient warm-up data -> exit 5
    CHECK(run("rollout --checkpoint cli_run/best.ckpt --data cli_ds --split val --index 0 --horizon 1e6 --out x.csv") == 5);

    // corrupted checkpoint magic -> exit 2
    {
        std::ofstream os("corrupt.ckpt", std::ios::binary);
        os << "NOTMAGIC and then garbage";
    }
    CHECK(run("rollout --checkpoint corrupt.ckpt --data cli_ds --horizon 10 --out x.csv") == 2);

    // analyze produces the report files; untrained/short models still yield Re <= 0
    CHECK(run("analyze --checkpoint cli_run/best.ckpt --data cli_ds --out cli_analysis --rollout-seconds 60 --horizons 5,10") == 0);
    CHECK(fs::exists("cli_analysis/spectral_report.csv"));
    CHECK(fs::exists("cli_analysis/freq_comparison.csv"));
    CHECK(fs::exists("cli_analysis/forecast_metrics.csv"));
    CHECK(fs::exists("cli_analysis/dynamics_norms.csv"));
    CHECK(fs::exists("cli_analysis/spectrum.svg"));
    {
        std::ifstream is("cli_analysis/spectral_report.csv");
        std::string header, l1, l2;
        std::getline(is, header);
        std::getline(is, l1);
        std::getline(is, l2);
        // eigenvalue real parts are the second column; stability by construction
        auto re_of = [](const std::string& line) {
            auto p1 = line.find(',');
            auto p2 = line.find(',', p1 + 1);
            return std::stod(line.substr(p1 + 1, p2 - p1 - 1));
        };
        CHECK(re_of(l1) <= 1e-12);
        CHECK(re_of(l2) <= 1e-12);
    }
}

TEST_CASE("train with --epochs 0 stores the initialization") {
    fs::remove_all("cli_run0");
    write_tiny_fhn_config("tiny0.toml", 2);
    REQUIRE(fs::exists("cli_ds/meta.json"));
    CHECK(run("train --config tiny0.toml --data cli_ds --out cli_run0 --epochs 0") == 0);
    CHECK(fs::exists("cli_run0/best.ckpt"));
}

TEST_CASE("same seed twice gives byte-identical datasets, logs and checkpoints") {
    write_tiny_fhn_config("tiny2.toml", 2);
    for (const char* tag : {"a", "b"}) {
        const std::string ds = std::string("cli_det_ds_") + tag;
        const std::string rn = std::string("cli_det_run_") + tag;
        fs::remove_all(ds);
        fs::remove_all(rn);
        CHECK(run("gen-data --config tiny2.toml --out " + ds + " --threads 2") == 0);
        CHECK(run("train --config tiny2.toml --data " + ds + " --out " + rn + " --threads 2") == 0);
        CHECK(run("analyze --checkpoint " + rn + "/best.ckpt --data " + ds + " --out " + rn +
                  "/analysis --rollout-seconds 60 --horizons 5,10") == 0);
    }
    for (const char* f : {"meta.json", "traj_train_0.f64", "traj_test_0.f64"})
        CHECK(slurp(fs::path("cli_det_ds_a") / f) == slurp(fs::path("cli_det_ds_b") / f));
    for (const char* f : {"training_log.csv", "best.ckpt", "config.json"})
        CHECK(slurp(fs::path("cli_det_run_a") / f) == slurp(fs::path("cli_det_run_b") / f));
    for (const char* f : {"spectral_report.csv", "forecast_metrics.csv", "freq_comparison.csv"})
        CHECK(slurp(fs::path("cli_det_run_a/analysis") / f) == slurp(fs::path("cli_det_run_b/analysis") / f));
}

TEST_CASE("scan-latent-dim runs on a tiny dataset") {
    REQUIRE(fs::exists("cli_ds/meta.json"));
    CHECK(run("scan-latent-dim --config tiny.toml --data cli_ds --out cli_scan.csv") == 0);
    std::ifstream is("cli_scan.csv");
    std::string header;
    std::getline(is, header);
    CHECK(header == "d_z,val_rel_l2");
}

TEST_CASE("multi-seed eigenvalue aggregation") {
    REQUIRE(fs::exists("cli_run/best.ckpt"));
    fs::create_directories("cli_seeds");
    fs::copy_file("cli_run/best.ckpt", "cli_seeds/a.ckpt", fs::copy_options::overwrite_existing);
    fs::copy_file("cli_run/best.ckpt", "cli_seeds/b.ckpt", fs::copy_options::overwrite_existing);
    CHECK(run("analyze --checkpoint cli_run/best.ckpt --data cli_ds --out cli_agg --seeds-dir cli_seeds "
              "--rollout-seconds 60 --horizons 5 --no-plots") == 0);
    CHECK(fs::exists("cli_agg/eigen_aggregate.csv"));
    std::ifstream is("cli_agg/eigen_aggregate.csv");
    std::string header, row;
    std::getline(is, header);
    CHECK(header == "rank,mean_freq_hz,std_freq_hz,count");
    std::getline(is, row);
    CHECK(row.substr(row.size() - 2) == ",2");  // both checkpoints contributed
}
