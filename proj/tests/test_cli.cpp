#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
};

Run run(const std::string& args) {
    std::string cmd = std::string(EQSEARCH_CLI) + " " + args + " 2>&1";
    Run r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    std::array<char, 4096> buf{};
    while (std::fgets(buf.data(), buf.size(), pipe)) r.out += buf.data();
    int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::vector<std::string> lines(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string l; std::getline(ss, l);)
        if (!l.empty()) out.push_back(l);
    return out;
}

// One small trained workspace shared by the pipeline tests.
class CliPipeline : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = fs::temp_directory_path() / ("eqsearch_cli_" + std::to_string(::getpid()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
        std::ofstream(dir_ / "train.conf") << "epochs = 4\nbatch_size = 32\ntriplets_per_epoch = 256\nlr0 = 0.001\n";
        const std::string d = " --dir " + dir_.string();
        ok_ = run("synth --papers 40" + d).code == 0 && run("vocab" + d).code == 0 && run("train" + d).code == 0 &&
              run("embed" + d).code == 0 && run("index --trees 4" + d).code == 0;
    }
    static void TearDownTestSuite() { fs::remove_all(dir_); }

    static std::string d() { return " --dir " + dir_.string(); }

    static inline fs::path dir_;
    static inline bool ok_ = false;
};

}  // namespace

TEST(Cli, NoArgumentsPrintsUsage) {
    auto r = run("");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("Usage"), std::string::npos);
}

TEST(Cli, UnknownSubcommandFails) {
    auto r = run("frobnicate");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("Usage"), std::string::npos);
}

TEST(Cli, MissingInputFails) {
    EXPECT_EQ(run("vocab --corpus /nonexistent/eqsearch").code, 1);
}

TEST_F(CliPipeline, ArtifactsExist) {
    ASSERT_TRUE(ok_);
    for (const char* f : {"corpus/papers.jsonl", "corpus/equations.jsonl", "vocab.json", "model.ckpt", "store.bin", "index.bin"})
        EXPECT_TRUE(fs::exists(dir_ / f)) << f;
}

TEST_F(CliPipeline, SearchPrintsRankedResults) {
    ASSERT_TRUE(ok_);
    auto r = run("search -k 3 'P(d|s) = \\frac{P(s|d) P(d)}{P(s)}'" + d());
    ASSERT_EQ(r.code, 0) << r.out;
    auto ls = lines(r.out);
    ASSERT_EQ(ls.size(), 4u) << r.out;
    double prev = 1e300;
    for (std::size_t i = 1; i < ls.size(); ++i) {
        std::istringstream row(ls[i]);
        std::size_t rank = 0;
        double score = 0;
        std::string id;
        row >> rank >> score >> id;
        EXPECT_EQ(rank, i);
        EXPECT_LE(score, prev);
        EXPECT_NE(id.find("synth."), std::string::npos);
        prev = score;
    }
}

TEST_F(CliPipeline, ExplicitIndexAgreesWithScanOnSmallStore) {
    ASSERT_TRUE(ok_);
    const std::string q = " -k 5 'a^2 + b^2'";
    auto scanned = run("search --exact" + q + d());
    auto indexed = run("search --index " + (dir_ / "index.bin").string() + q + d());
    ASSERT_EQ(scanned.code, 0) << scanned.out;
    ASSERT_EQ(indexed.code, 0) << indexed.out;
    EXPECT_EQ(scanned.out, indexed.out);
}

TEST_F(CliPipeline, MalformedQueryFails) {
    ASSERT_TRUE(ok_);
    auto r = run("search '\\frac{'" + d());
    EXPECT_EQ(r.code, 1);
}

TEST_F(CliPipeline, CiPrintsThreeNumbers) {
    ASSERT_TRUE(ok_);
    auto t = (dir_ / "t.jsonl").string();
    ASSERT_EQ(run("train --materialize " + t + " --count 300" + d()).code, 0);
    auto r = run("ci --triplets " + t + " --delta 0.05 --mode incomplete" + d());
    ASSERT_EQ(r.code, 0) << r.out;
    auto ls = lines(r.out);
    ASSERT_EQ(ls.size(), 3u) << r.out;
    double s = std::stod(ls[0]), chi = std::stod(ls[1]), upper = std::stod(ls[2]);
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
    EXPECT_GE(chi, 1.0);
    EXPECT_GT(upper, s);
}

TEST_F(CliPipeline, EvalPairsReportsRecall) {
    ASSERT_TRUE(ok_);
    auto p = (dir_ / "pairs.jsonl").string();
    ASSERT_EQ(run("pairs --out " + p + d()).code, 0);
    auto r = run("eval --pairs " + p + " --bow" + d());
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("\"R@10\""), std::string::npos);
    EXPECT_NE(r.out.find("\"bow\""), std::string::npos);
}
