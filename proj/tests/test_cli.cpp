#include "fixtures.hpp"

#include "ctl/data/corpus_io.hpp"
#include "ctl/eval/report.hpp"
#include "ctl/net/checkpoint.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

using nlohmann::json;

namespace {

struct Run {
    int status = -1;
    std::string out, err;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

Run ctl_run(const fixtures::TempDir& dir, const std::string& args) {
    const auto out = dir.file("stdout.txt"), err = dir.file("stderr.txt");
    const std::string cmd = std::string(CTL_CLI_PATH) + " " + args + " >" + out + " 2>" + err;
    const int raw = std::system(cmd.c_str());
    return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(out), slurp(err)};
}

/// synth -> split -> train -> index -> eval -> export -> precision in `dir`.
void pipeline(const fixtures::TempDir& dir) {
    auto step = [&](const std::string& args) {
        const auto r = ctl_run(dir, args);
        ASSERT_EQ(r.status, 0) << args << "\n" << r.err;
    };
    const auto f = [&](const char* name) { return dir.file(name); };
    step("synth --outfits 400 --feature-dim 40 --style-dim 8 --seed 3 --out " + f("all.jsonl") + " --features " +
         f("feat.ctlf") + " --catalog-out " + f("catalog.jsonl"));
    step("split --input " + f("all.jsonl") + " --train-out " + f("train.jsonl") + " --test-out " + f("test.jsonl") +
         " --holdout 0.25 --seed 2");
    step("stats --input " + f("all.jsonl") + " --out " + f("stats.json"));
    step("train --train " + f("train.jsonl") + " --features " + f("feat.ctlf") + " --checkpoint " + f("model.ckpt") +
         " --epochs 2 --batch 32");
    step("index --checkpoint " + f("model.ckpt") + " --features " + f("feat.ctlf") + " --catalog " +
         f("catalog.jsonl") + " --out " + f("index.ctli") + " --created-at 1000");
    step("eval --checkpoint " + f("model.ckpt") + " --test " + f("test.jsonl") + " --features " + f("feat.ctlf") +
         " --corpus-size 20 --out " + f("eval.json"));
    step("export-judgments --method a=" + f("model.ckpt") + "," + f("index.ctli") + " --features " + f("feat.ctlf") +
         " --catalog " + f("catalog.jsonl") + " --n-queries 5 --k 3 --out " + f("tasks.jsonl") + " --key-out " +
         f("key.json"));
    {
        std::ifstream ts(f("tasks.jsonl"));
        std::ofstream js(f("judgments.jsonl"));
        std::string line;
        int i = 0;
        while (std::getline(ts, line)) {
            const auto t = json::parse(line);
            js << json{{"task_id", t.at("task_id")}, {"verdict", i++ % 3 ? "compatible" : "incompatible"},
                       {"rater", "r"}, {"timestamp", 1}}
                      .dump()
               << '\n';
        }
    }
    step("precision --tasks " + f("tasks.jsonl") + " --judgments " + f("judgments.jsonl") + " --key " + f("key.json") +
         " --out " + f("precision.json"));
}

}  // namespace

TEST(Cli, CleanRunsAreByteIdentical) {
    fixtures::TempDir a, b;
    pipeline(a);
    if (HasFatalFailure()) return;
    pipeline(b);
    if (HasFatalFailure()) return;
    for (const char* name : {"all.jsonl", "feat.ctlf", "catalog.jsonl", "train.jsonl", "test.jsonl", "stats.json",
                             "model.ckpt", "index.ctli", "eval.json", "tasks.jsonl", "key.json", "precision.json"}) {
        const auto x = slurp(a.file(name));
        EXPECT_FALSE(x.empty()) << name;
        EXPECT_EQ(x, slurp(b.file(name))) << name;
    }
    const auto p = json::parse(slurp(a.file("precision.json")));
    ASSERT_TRUE(p.contains("a"));
    EXPECT_GT(p.at("a").at("compatible").get<int>(), 0);
}

TEST(Cli, EvalMatchesLibraryCall) {
    fixtures::TempDir dir;
    pipeline(dir);
    if (HasFatalFailure()) return;
    const auto vocab = ctl::data::CategoryVocab::defaults();
    const auto test = ctl::data::load_outfits(dir.file("test.jsonl"), vocab);
    const auto store = ctl::data::FeatureStore::load(dir.file("feat.ctlf"));
    const auto ck = ctl::net::load_checkpoint(dir.file("model.ckpt"));
    ctl::eval::EvalConfig cfg;
    cfg.corpus_size = 20;
    const auto rep = ctl::eval::evaluate(ck.metadata.at("method").get<std::string>(),
                                         ctl::eval::embed_outfits(ck.params, test, store), test, cfg);
    EXPECT_EQ(json::parse(slurp(dir.file("eval.json"))), ctl::eval::report_to_json(rep));
}

TEST(Cli, ErrorsAreStructuredWithNonzeroExit) {
    fixtures::TempDir dir;
    const auto missing = ctl_run(dir, "stats --input " + dir.file("nope.jsonl"));
    EXPECT_NE(missing.status, 0);
    const auto j = json::parse(missing.err.substr(0, missing.err.find('\n')));
    EXPECT_TRUE(j.contains("error"));
    EXPECT_TRUE(j.contains("message"));

    {
        std::ofstream os(dir.file("bad.ckpt"));
        os << "XXXXnot a checkpoint";
    }
    const auto bad = ctl_run(dir, "eval --checkpoint " + dir.file("bad.ckpt") + " --test " + dir.file("bad.ckpt") +
                                      " --features " + dir.file("bad.ckpt"));
    EXPECT_NE(bad.status, 0);
    EXPECT_NO_THROW(json::parse(bad.err.substr(0, bad.err.find('\n'))));

    const auto bad_method = ctl_run(dir, "synth --outfits 5 --out " + dir.file("o.jsonl") + " --features " +
                                             dir.file("f.ctlf") + " --noise -1");
    EXPECT_NE(bad_method.status, 0);

    EXPECT_NE(ctl_run(dir, "").status, 0);
    EXPECT_NE(ctl_run(dir, "train --train x").status, 0);
}

TEST(Cli, RandomBaselineRunsWithoutFeatures) {
    fixtures::TempDir dir;
    ASSERT_EQ(ctl_run(dir, "synth --outfits 300 --seed 4 --out " + dir.file("o.jsonl") + " --features " +
                               dir.file("f.ctlf"))
                  .status,
              0);
    const auto r = ctl_run(dir, "eval --random --test " + dir.file("o.jsonl") + " --mode all_categories --out " +
                                    dir.file("r.json"));
    ASSERT_EQ(r.status, 0) << r.err;
    const auto j = json::parse(slurp(dir.file("r.json")));
    EXPECT_EQ(j.at("method"), "random");
    EXPECT_NE(r.out.find("random"), std::string::npos);
}
