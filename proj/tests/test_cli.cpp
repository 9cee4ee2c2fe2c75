// CLI integration tests; the binary path arrives via the DRQR_CLI env var and
// the suite is skipped when the tool was not built.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

const char* cli_path() { return std::getenv("DRQR_CLI"); }

struct CliFixture {
    fs::path dir;

    CliFixture() {
        dir = fs::temp_directory_path() / "drqr_cli_fixture";
        fs::remove_all(dir);
        fs::create_directories(dir);
        write("corpus.tsv",
              "d1\tThe cats sat on the mat by the door\n"
              "d2\tA cat and a hat in the house\n"
              "d3\tDogs run fast in the park every day\n"
              "d4\tThe dog runs and the dog barks loudly\n"
              "d5\tInformation retrieval systems rank documents for queries\n"
              "d6\tNeural networks learn query reformulations for retrieval\n"
              "d7\tThe park has trees dogs and runners\n"
              "d8\tRanking models score documents by term statistics\n");
        write("queries.tsv",
              "q1\tcats on mats\n"
              "q2\tdogs running in parks\n"
              "q3\tdocument ranking for retrieval\n");
        write("qrels.txt",
              "q1 0 d1 2\nq1 0 d2 1\nq2 0 d3 2\nq2 0 d4 1\nq2 0 d7 1\n"
              "q3 0 d5 2\nq3 0 d8 1\nq3 0 d6 1\n");
        write("mine_qrels.txt",
              "t1 0 d1 1\nt2 0 d1 1\nt3 0 d3 1\nt4 0 d3 2\n"
              "t5 0 d5 1\nt6 0 d5 1\nt7 0 d1 1\n");
        write("all_queries.tsv",
              "t1\tcats sitting on mats\n"
              "t2\tcat sat mat\n"
              "t3\tdogs run park\n"
              "t4\trunning dogs in the park\n"
              "t5\tdocument ranking retrieval\n"
              "t6\tranking documents for retrieval\n"
              "t7\tcat on a mat\n");
    }

    void write(const std::string& name, const std::string& content) const {
        std::ofstream out(dir / name);
        out << content;
    }

    std::string path(const std::string& name) const { return (dir / name).string(); }

    int run(const std::string& args) const {
        std::string command = std::string(cli_path()) + " " + args + " > " +
                              (dir / "stdout.log").string() + " 2> " +
                              (dir / "stderr.log").string();
        return std::system(command.c_str());
    }

    std::string slurp(const std::string& name) const {
        std::ifstream in(dir / name);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }
};

}  // namespace

TEST_CASE("cli end-to-end toy pipeline emits every declared artifact") {
    if (!cli_path()) return;  // tool build disabled
    CliFixture fx;

    CHECK(fx.run("index build --corpus " + fx.path("corpus.tsv") + " --output " +
                 fx.path("idx.bin") + " --stopwords " DRQR_STOPWORDS_FILE) == 0);
    CHECK(fs::exists(fx.dir / "idx.bin"));
    CHECK(fs::exists(fx.dir / "idx.bin.manifest.json"));

    CHECK(fx.run("mine pairs --qrels " + fx.path("mine_qrels.txt") + " --queries " +
                 fx.path("all_queries.tsv") + " --output " + fx.path("pairs.tsv")) == 0);
    CHECK(fs::exists(fx.dir / "pairs.tsv"));
    CHECK(fx.slurp("stdout.log").find("ordered_pairs=10") != std::string::npos);
    CHECK(fx.slurp("stdout.log").find("unordered_pairs=5") != std::string::npos);

    CHECK(fx.run("--seed 5 train ml --pairs " + fx.path("pairs.tsv") + " --output " +
                 fx.path("ckpt.bin") + " --hidden 8 --emb 8 --epochs 2 --patience 5 "
                 "--batch-size 4 --train-fraction 0.8 --history " +
                 fx.path("hist.tsv")) == 0);
    CHECK(fs::exists(fx.dir / "ckpt.bin"));
    CHECK(fs::exists(fx.dir / "hist.tsv"));

    CHECK(fx.run("--seed 5 train rl --checkpoint " + fx.path("ckpt.bin") + " --pairs " +
                 fx.path("pairs.tsv") + " --index " + fx.path("idx.bin") + " --output " +
                 fx.path("ckpt_rl.bin") + " --rl-epochs 1 --rl-batch-size 4 "
                 "--train-fraction 0.8 --history " +
                 fx.path("rl_hist.tsv")) == 0);
    CHECK(fs::exists(fx.dir / "ckpt_rl.bin"));
    std::string rl_hist = fx.slurp("rl_hist.tsv");
    CHECK(rl_hist.find("epoch\tmean_sample_reward\tmean_baseline_reward\tmean_advantage") !=
          std::string::npos);

    CHECK(fx.run("reformulate --checkpoint " + fx.path("ckpt_rl.bin") + " --queries " +
                 fx.path("queries.tsv") + " --output " + fx.path("reform.tsv")) == 0);
    CHECK(fs::exists(fx.dir / "reform.tsv"));

    CHECK(fx.run("retrieve --index " + fx.path("idx.bin") + " --queries " +
                 fx.path("queries.tsv") + " --output " + fx.path("run.txt")) == 0);
    CHECK(fx.run("evaluate --run " + fx.path("run.txt") + " --qrels " + fx.path("qrels.txt") +
                 " --output " + fx.path("eval.tsv") + " --metrics map,ndcg@10 --per-query " +
                 fx.path("perq.tsv")) == 0);
    CHECK(fs::exists(fx.dir / "eval.tsv"));
    CHECK(fs::exists(fx.dir / "perq.tsv"));

    CHECK(fx.run("qpp correlate --index " + fx.path("idx.bin") + " --queries " +
                 fx.path("queries.tsv") + " --run " + fx.path("run.txt") + " --qrels " +
                 fx.path("qrels.txt") + " --output " + fx.path("corr.tsv") + " --json " +
                 fx.path("corr.json") + " --permutations 500") == 0);
    CHECK(fs::exists(fx.dir / "corr.tsv"));
    CHECK(fs::exists(fx.dir / "corr.json"));

    CHECK(fx.run("report histogram --baseline " + fx.path("run.txt") + " --treatment " +
                 fx.path("run.txt") + " --qrels " + fx.path("qrels.txt") + " --output " +
                 fx.path("hist.json")) == 0);
    CHECK(fx.slurp("hist.json").find("\"unchanged\": 3") != std::string::npos);

    CHECK(fx.run("qpp predict --index " + fx.path("idx.bin") + " --queries " +
                 fx.path("queries.tsv") + " --output " + fx.path("qpp.tsv")) == 0);
    std::string qpp_table = fx.slurp("qpp.tsv");
    CHECK(qpp_table.find("qid\tkind\tvalue\tscored_terms") != std::string::npos);
    CHECK(qpp_table.find("q1\tAvgIDF\t") != std::string::npos);
    CHECK(qpp_table.find("q3\tQueryLength\t") != std::string::npos);
}

TEST_CASE("retrieve with theta=0 matches plain retrieval byte-for-byte") {
    if (!cli_path()) return;
    CliFixture fx;
    REQUIRE(fx.run("index build --corpus " + fx.path("corpus.tsv") + " --output " +
                   fx.path("idx.bin")) == 0);
    fx.write("reform.tsv", "q1\tdogs dogs dogs\nq2\tcats\nq3\tnetworks\n");
    REQUIRE(fx.run("retrieve --index " + fx.path("idx.bin") + " --queries " +
                   fx.path("queries.tsv") + " --output " + fx.path("plain.txt")) == 0);
    REQUIRE(fx.run("retrieve --index " + fx.path("idx.bin") + " --queries " +
                   fx.path("queries.tsv") + " --reformulations " + fx.path("reform.tsv") +
                   " --theta 0 --output " + fx.path("mixed.txt")) == 0);
    CHECK(fx.slurp("plain.txt") == fx.slurp("mixed.txt"));
    CHECK(!fx.slurp("plain.txt").empty());
}

TEST_CASE("identical invocations produce identical manifests") {
    if (!cli_path()) return;
    CliFixture fx;
    std::string build = "index build --corpus " + fx.path("corpus.tsv") + " --output " +
                        fx.path("idx.bin");
    REQUIRE(fx.run(build) == 0);
    std::string first = fx.slurp("idx.bin.manifest.json");
    REQUIRE(fx.run(build) == 0);
    CHECK(first == fx.slurp("idx.bin.manifest.json"));
    CHECK(first.find("sha") == std::string::npos);  // hashes inline, no placeholders
    CHECK(first.find("\"inputs\"") != std::string::npos);
    CHECK(first.find("\"outputs\"") != std::string::npos);
}

TEST_CASE("seeded training runs are bit-identical at the artifact level") {
    if (!cli_path()) return;
    CliFixture fx;
    REQUIRE(fx.run("mine pairs --qrels " + fx.path("mine_qrels.txt") + " --queries " +
                   fx.path("all_queries.tsv") + " --output " + fx.path("pairs.tsv")) == 0);
    std::string train = "--seed 11 train ml --pairs " + fx.path("pairs.tsv") +
                        " --hidden 8 --emb 8 --epochs 2 --batch-size 4 --train-fraction 0.8";
    REQUIRE(fx.run(train + " --output " + fx.path("a.bin")) == 0);
    REQUIRE(fx.run(train + " --output " + fx.path("b.bin")) == 0);
    CHECK(fx.slurp("a.bin") == fx.slurp("b.bin"));
    CHECK(!fx.slurp("a.bin").empty());
}

TEST_CASE("sweep over a 2x2 grid runs 4 cells and reports the argmax") {
    if (!cli_path()) return;
    CliFixture fx;
    REQUIRE(fx.run("index build --corpus " + fx.path("corpus.tsv") + " --output " +
                   fx.path("idx.bin")) == 0);
    fx.write("reform_0.tsv", "q1\tcats\nq2\tdogs\nq3\tranking\n");
    fx.write("reform_0.5.tsv", "q1\tmat\nq2\tpark\nq3\tdocuments\n");
    REQUIRE(fx.run("sweep --index " + fx.path("idx.bin") + " --queries " +
                   fx.path("queries.tsv") + " --qrels " + fx.path("qrels.txt") +
                   " --reformulations-template " + fx.path("reform_{lambda}.tsv") +
                   " --lambdas 0,0.5 --thetas 0,0.5 --output " + fx.path("sweep.tsv")) == 0);
    std::string table = fx.slurp("sweep.tsv");
    std::size_t rows = 0;
    for (char c : table)
        if (c == '\n') ++rows;
    CHECK(rows == 6);  // header + 4 cells + best line
    CHECK(table.find("# best") != std::string::npos);
    CHECK(fx.slurp("stdout.log").find("swept 4 cells") != std::string::npos);
}

TEST_CASE("cli rejects unknown flags and missing files with nonzero exits") {
    if (!cli_path()) return;
    CliFixture fx;
    CHECK(fx.run("retrieve --no-such-flag") != 0);
    CHECK(fx.run("evaluate --run " + fx.path("nonexistent.txt") + " --qrels " +
                 fx.path("qrels.txt") + " --output " + fx.path("x.tsv")) != 0);
    CHECK(fx.slurp("stderr.log").find("nonexistent.txt") != std::string::npos);
    CHECK(fx.run("") != 0);  // a subcommand is required
}
