#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <sys/wait.h>

// IPOST_CLI_PATH is injected by the build so the test can drive the real binary.
#ifndef IPOST_CLI_PATH
#error "IPOST_CLI_PATH must be defined"
#endif

namespace {

const std::string kCli = IPOST_CLI_PATH;

std::filesystem::path work_dir() {
    const auto dir = std::filesystem::temp_directory_path() / "ipost_cli_tests";
    return dir;
}

int run(const std::string& args, const std::string& capture_name = "") {
    const auto log = work_dir() / (capture_name.empty() ? "last_output.txt" : capture_name);
    const std::string command = kCli + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(command.c_str());
    if (status == -1) return -1;
    return WIFEXITED(status) ? WEXITSTATUS(status) : -2;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return "";
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("usage and error exit codes") {
    std::filesystem::remove_all(work_dir());
    std::filesystem::create_directories(work_dir());

    CHECK(run("--help") == 0);
    CHECK(run("gen-data --help") == 0);
    CHECK(run("") == 2);                  // a subcommand is required
    CHECK(run("frobnicate") == 2);        // unknown subcommand
    CHECK(run("gen-data --classes cross,disc") == 2);  // missing required --out
    CHECK(run("gen-data --task nonsense --classes a --out x") == 2);

    // runtime failures exit 1: --out is valid but a class name is not
    const auto out = (work_dir() / "never").string();
    CHECK(run("gen-data --task items --classes cross,blob --out " + out) == 1);
}

TEST_CASE("journal-verify distinguishes sound and broken files") {
    std::filesystem::create_directories(work_dir());
    const auto good = work_dir() / "good_journal.tsv";
    {
        std::ofstream out(good, std::ios::binary);
        out << "rcp-1\talice\t100\t10\nrcp-2\tbob\t200\t20\n";
    }
    CHECK(run("journal-verify --journal " + good.string()) == 0);

    const auto bad = work_dir() / "bad_journal.tsv";
    {
        std::ofstream out(bad, std::ios::binary);
        out << "not a journal at all\n";
    }
    CHECK(run("journal-verify --journal " + bad.string()) == 1);
    CHECK(run("journal-verify --journal " + (work_dir() / "absent.tsv").string()) == 1);
}

TEST_CASE("the full pipeline runs end to end") {
    const auto dir = work_dir() / "pipeline";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    const std::string d = dir.string();

    // items: generate and train a small binary classifier
    REQUIRE(run("gen-data --task items --classes cross,disc --samples 6 --size 24"
                " --noise 0.2 --seed 11 --out " + d + "/items") == 0);
    CHECK(std::filesystem::exists(dir / "items" / "manifest.tsv"));
    CHECK(std::filesystem::exists(dir / "items" / "cross_0000.pgm"));
    CHECK(std::filesystem::exists(dir / "items" / "disc_0005.pgm"));

    REQUIRE(run("train --manifest " + d + "/items/manifest.tsv --arch classifier --loss bce"
                " --epochs 1 --batch 8 --dropout 0.25 --seed 3 --metrics " + d + "/metrics.tsv"
                " --out " + d + "/item.ckpt", "train_items.txt") == 0);
    CHECK(std::filesystem::exists(dir / "item.ckpt"));
    const std::string metrics = read_text(dir / "metrics.tsv");
    CHECK(metrics.find('\t') != std::string::npos);

    CHECK(run("eval --manifest " + d + "/items/manifest.tsv --checkpoint " + d + "/item.ckpt"
              " --loss bce", "eval.txt") == 0);
    const std::string eval_out = read_text(work_dir() / "eval.txt");
    CHECK(eval_out.find("accuracy") != std::string::npos);

    // faces: generate, train an embedder, enroll, match a probe
    REQUIRE(run("gen-data --task faces --classes alice,bob --samples 6 --size 24"
                " --noise 0.2 --seed 12 --out " + d + "/faces") == 0);
    REQUIRE(run("train --manifest " + d + "/faces/manifest.tsv --arch embedder --epochs 1"
                " --batch 8 --embedding-dim 8 --dropout 0 --margin 0.3 --seed 4"
                " --out " + d + "/face.ckpt", "train_faces.txt") == 0);
    REQUIRE(run("enroll --manifest " + d + "/faces/manifest.tsv --checkpoint " + d + "/face.ckpt"
                " --threshold 0.9 --out " + d + "/gallery.txt") == 0);
    CHECK(std::filesystem::exists(dir / "gallery.txt"));

    CHECK(run("match --image " + d + "/faces/alice_0000.pgm --checkpoint " + d + "/face.ckpt"
              " --gallery " + d + "/gallery.txt", "match.txt") == 0);
    const std::string match_out = read_text(work_dir() / "match.txt");
    CHECK(match_out.find("decision\t") != std::string::npos);
    CHECK(match_out.find("distance\t") != std::string::npos);

    // eval refuses an embedding checkpoint
    CHECK(run("eval --manifest " + d + "/faces/manifest.tsv --checkpoint " + d + "/face.ckpt")
          == 1);

    // simulate against the trained artifacts, then verify the journal
    REQUIRE(run("simulate --item-net " + d + "/item.ckpt --face-net " + d + "/face.ckpt"
                " --gallery " + d + "/gallery.txt --item-classes cross,disc"
                " --identities alice,bob --price cross=250 --price disc=75"
                " --shoppers 8 --seed 5 --noise 0.2 --journal " + d + "/journal.tsv"
                " --report " + d + "/report.txt", "simulate.txt") == 0);
    const std::string report = read_text(dir / "report.txt");
    CHECK(report.find("shoppers\t8") != std::string::npos);
    CHECK(report.find("violations\t0") != std::string::npos);

    CHECK(run("journal-verify --journal " + d + "/journal.tsv") == 0);

    // the same simulation twice writes identical reports and journals
    REQUIRE(run("simulate --item-net " + d + "/item.ckpt --face-net " + d + "/face.ckpt"
                " --gallery " + d + "/gallery.txt --item-classes cross,disc"
                " --identities alice,bob --price cross=250 --price disc=75"
                " --shoppers 8 --seed 5 --noise 0.2 --journal " + d + "/journal2.tsv"
                " --report " + d + "/report2.txt", "simulate2.txt") == 0);
    CHECK(read_text(dir / "report2.txt") == report);
    CHECK(read_text(dir / "journal2.tsv") == read_text(dir / "journal.tsv"));
}
