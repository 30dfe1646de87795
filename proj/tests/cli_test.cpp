// Runs the relsim binary end to end on a synthetic corpus.

#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "relsim/index.hpp"
#include "relsim/pipeline.hpp"
#include "relsim/rseb.hpp"
#include "synthetic_fixture.hpp"
#include "test_util.hpp"

namespace relsim {
namespace {

using fixtures::SyntheticSpec;
using fixtures::TempDir;
using nlohmann::json;

struct RunResult {
    int exit_code = -1;
    std::string out;
};

RunResult run(const std::string& args, const std::string& err_file = "/dev/null") {
    const std::string cmd = std::string(RELSIM_CLI_PATH) + " " + args + " 2>" + err_file;
    RunResult r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    std::size_t n = 0;
    while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
    const int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write(const std::string& path, const std::string& text) { std::ofstream(path, std::ios::binary) << text; }

// groups.jsonl plus base/caption tables for 16 groups of 10 images.
struct Corpus {
    TempDir dir{"cli_corpus"};
    std::string groups, base, captions;

    Corpus() {
        SyntheticSpec spec;
        spec.per_group = 10;
        const auto fx = fixtures::make_synthetic_fixture(spec);
        groups = dir.file("groups.jsonl");
        base = dir.file("base.rseb");
        captions = dir.file("captions.rseb");
        std::string lines;
        for (const auto& g : fx.group_ids) {
            json images = json::array();
            for (const auto& id : fx.image_ids) {
                if (fx.group_of.at(id) == g) images.push_back(id);
            }
            lines += json{{"group", g}, {"images", images}, {"caption", "the {a} " + g + " {b}"}}.dump() + "\n";
        }
        write(groups, lines);
        save_rseb(fx.base, base);
        save_rseb(fx.captions, captions);
    }
};

TEST(Cli, UsageErrors) {
    EXPECT_EQ(run("").exit_code, 1);
    EXPECT_EQ(run("train --data x.jsonl").exit_code, 1);
    EXPECT_EQ(run("no-such-command").exit_code, 1);
    EXPECT_EQ(run("index").exit_code, 1);
    EXPECT_EQ(run("--help").exit_code, 0);
}

TEST(Cli, MissingFileIsRuntimeError) {
    TempDir dir{"cli_1"};
    EXPECT_EQ(run("index build --emb " + dir.file("absent.rseb") + " --out " + dir.file("i.rseb")).exit_code, 3);
}

TEST(Cli, CorruptFileIsDataError) {
    TempDir dir{"cli_2"};
    write(dir.file("junk.rseb"), "definitely not an embedding file");
    EXPECT_EQ(run("index build --emb " + dir.file("junk.rseb") + " --out " + dir.file("i.rseb")).exit_code, 2);
}

TEST(Cli, ValidateCaptions) {
    TempDir dir{"cli_3"};
    write(dir.file("ok.jsonl"), "{\"caption\":\"{a} beside {b}\"}\n{\"caption\":\"the {x} holds {y}\"}\n");
    write(dir.file("bad.jsonl"), "{\"caption\":\"{a} beside the Eiffel tower\"}\n{\"caption\":\"{unclosed\"}\n");
    write(dir.file("lexicon.txt"), "# proper nouns\neiffel\n");

    auto r = run("validate-captions --data " + dir.file("ok.jsonl"));
    EXPECT_EQ(r.exit_code, 0);
    EXPECT_EQ(r.out, "{\"checked\":2,\"violations\":0}\n");

    r = run("validate-captions --data " + dir.file("bad.jsonl") + " --lexicon " + dir.file("lexicon.txt"));
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_EQ(r.out, "{\"checked\":2,\"violations\":2}\n");

    r = run("validate-captions --lenient --data " + dir.file("bad.jsonl") + " --lexicon " + dir.file("lexicon.txt"));
    EXPECT_EQ(r.exit_code, 0);
}

TEST(Cli, EndToEndRetrieval) {
    Corpus c;
    const auto& d = c.dir;

    auto r = run("expand-groups --groups " + c.groups + " --out " + d.file("data.jsonl"));
    ASSERT_EQ(r.exit_code, 0);
    EXPECT_EQ(json::parse(r.out)["records"], 160);
    EXPECT_EQ(json::parse(r.out)["warnings"], 0);

    r = run("split --data " + d.file("data.jsonl") + " --test-fraction 0.25 --seed 3 --train-out " +
            d.file("train.jsonl") + " --test-out " + d.file("test.jsonl"));
    ASSERT_EQ(r.exit_code, 0);
    EXPECT_EQ(json::parse(r.out)["train"], 120);
    EXPECT_EQ(json::parse(r.out)["test"], 40);

    write(d.file("config.json"), R"({"batch_size": 32, "steps": 500, "learning_rate": 0.01})");
    r = run("train --data " + d.file("train.jsonl") + " --image-emb " + c.base + " --text-emb " + c.captions +
            " --config " + d.file("config.json") + " --steps 2000 --lr 0.001 --out " + d.file("model.rseb"));
    ASSERT_EQ(r.exit_code, 0);
    // Flags override the config file: 2000 log lines, not 500.
    std::istringstream log(r.out);
    std::string line;
    std::size_t lines = 0;
    json first;
    json last;
    json trailer;
    while (std::getline(log, line)) {
        const auto j = json::parse(line);
        if (j.contains("final_model")) {
            trailer = j;
            continue;
        }
        last = j;
        if (lines++ == 0) first = last;
    }
    EXPECT_EQ(lines, 2000u);
    EXPECT_EQ(trailer["final_model"], d.file("model.rseb"));
    EXPECT_EQ(r.out.substr(r.out.size() - 1 - trailer.dump().size()), trailer.dump() + "\n");
    EXPECT_EQ(r.out.rfind("{\"step\":0,\"loss\":", 0), 0u) << r.out.substr(0, 80);
    EXPECT_LT(last["loss"].get<double>(), first["loss"].get<double>());

    ASSERT_EQ(run("project --model " + d.file("model.rseb") + " --image-emb " + c.base + " --out " +
                  d.file("rel.rseb"))
                  .exit_code,
              0);
    ASSERT_EQ(run("index build --emb " + d.file("rel.rseb") + " --out " + d.file("index.rseb")).exit_code, 0);

    r = run("eval-retrieval --index " + d.file("index.rseb") + " --judge oracle --groups " + c.groups +
            " --queries " + d.file("train.jsonl") + " --concurrency 4");
    ASSERT_EQ(r.exit_code, 0);
    const auto report = json::parse(r.out);
    EXPECT_EQ(report["count"], 120);
    EXPECT_GE(report["mean"].get<double>(), 9.0);

    // Sampling is seeded.
    const auto s1 = run("eval-retrieval --index " + d.file("index.rseb") + " --groups " + c.groups +
                        " --sample 10 --seed 5");
    const auto s2 = run("eval-retrieval --index " + d.file("index.rseb") + " --groups " + c.groups +
                        " --sample 10 --seed 5");
    ASSERT_EQ(s1.exit_code, 0);
    EXPECT_EQ(json::parse(s1.out)["count"], 10);
    EXPECT_EQ(s1.out, s2.out);
}

TEST(Cli, TrainIsDeterministic) {
    Corpus c;
    const auto& d = c.dir;
    ASSERT_EQ(run("expand-groups --groups " + c.groups + " --out " + d.file("data.jsonl")).exit_code, 0);
    const std::string common = "train --data " + d.file("data.jsonl") + " --image-emb " + c.base + " --text-emb " +
                               c.captions + " --steps 50 --seed 9";
    // Same output paths both times; the log ends with the model path.
    const std::string outputs = " --out " + d.file("m.rseb") + " --log " + d.file("log.jsonl");
    const auto a = run(common + outputs);
    ASSERT_EQ(a.exit_code, 0);
    EXPECT_TRUE(a.out.empty());
    const auto model_a = slurp(d.file("m.rseb"));
    const auto log_a = slurp(d.file("log.jsonl"));
    ASSERT_EQ(run(common + outputs).exit_code, 0);
    EXPECT_EQ(model_a, slurp(d.file("m.rseb")));
    EXPECT_EQ(log_a, slurp(d.file("log.jsonl")));
    EXPECT_FALSE(log_a.empty());

    EXPECT_EQ(run(common + " --optimizer rmsprop --out " + d.file("c.rseb")).exit_code, 2);
}

TEST(Cli, IndexQueryMatchesLibrary) {
    Corpus c;
    const auto& d = c.dir;
    ASSERT_EQ(run("index build --emb " + c.base + " --out " + d.file("index.rseb")).exit_code, 0);
    const auto index = VectorIndex::load(d.file("index.rseb"));

    for (const std::string id : {"group_00_img_00", "group_07_img_03", "group_15_img_09"}) {
        const auto r = run("index query --index " + d.file("index.rseb") + " --query-id " + id + " --k 5 --exclude-self");
        ASSERT_EQ(r.exit_code, 0) << id;
        const auto got = json::parse(r.out)["results"];
        const auto want = index.top_k_for_id(id, 5, true).ranked;
        ASSERT_EQ(got.size(), want.size());
        for (std::size_t i = 0; i < want.size(); ++i) {
            EXPECT_EQ(got[i]["id"], want[i].id);
            EXPECT_FLOAT_EQ(got[i]["score"].get<float>(), want[i].score);
        }
    }
    EXPECT_EQ(run("index query --index " + d.file("index.rseb") + " --query-id nobody").exit_code, 2);
}

TEST(Cli, FilterTrainAndApply) {
    TempDir dir{"cli_4"};
    Rng rng(4);
    EmbeddingTable table(SectionTag::Embeddings, 8);
    std::string labels;
    for (int i = 0; i < 200; ++i) {
        std::vector<float> x(8);
        for (auto& v : x) v = static_cast<float>(rng.normal());
        const bool interesting = x[0] > 0;
        x[0] += interesting ? 1.0f : -1.0f;
        const auto id = "img" + std::to_string(i);
        table.append(id, x);
        labels += json{{"id", id}, {"label", interesting ? "interesting" : "ordinary"}}.dump() + "\n";
    }
    save_rseb(table, dir.file("emb.rseb"));
    write(dir.file("labels.jsonl"), labels);

    auto r = run("filter train --emb " + dir.file("emb.rseb") + " --labels " + dir.file("labels.jsonl") + " --out " +
                 dir.file("filter.rseb"));
    ASSERT_EQ(r.exit_code, 0);
    EXPECT_GE(json::parse(r.out)["heldout_accuracy"].get<double>(), 0.9);

    r = run("filter apply --filter " + dir.file("filter.rseb") + " --emb " + dir.file("emb.rseb"));
    ASSERT_EQ(r.exit_code, 0);
    const auto out = json::parse(r.out);
    EXPECT_EQ(out["total"], 200);
    EXPECT_DOUBLE_EQ(out["keep_rate"].get<double>(), out["kept"].size() / 200.0);
}

TEST(Cli, AbAndQuadrant) {
    TempDir dir{"cli_5"};
    write(dir.file("ab.jsonl"),
          "{\"query\":\"q1\",\"a\":\"x\",\"b\":\"y\",\"choice\":\"A\",\"ours\":\"A\"}\n"
          "{\"query\":\"q2\",\"a\":\"x\",\"b\":\"y\",\"choice\":\"A\",\"ours\":\"B\"}\n"
          "{\"query\":\"q3\",\"a\":\"x\",\"b\":\"y\",\"choice\":\"Same\",\"ours\":\"B\"}\n"
          "{\"query\":\"q4\",\"a\":\"x\",\"b\":\"y\",\"choice\":\"B\",\"ours\":\"B\"}\n");
    auto r = run("eval-ab --records " + dir.file("ab.jsonl"));
    ASSERT_EQ(r.exit_code, 0);
    const auto ab = json::parse(r.out);
    EXPECT_EQ(ab["total"], 4);
    EXPECT_DOUBLE_EQ(ab["ours_rate"].get<double>(), 0.5);
    EXPECT_DOUBLE_EQ(ab["baseline_rate"].get<double>(), 0.25);
    EXPECT_DOUBLE_EQ(ab["tie_rate"].get<double>(), 0.25);

    write(dir.file("bad.jsonl"), "{\"query\":\"q1\",\"a\":\"x\",\"b\":\"y\",\"choice\":\"C\",\"ours\":\"A\"}\n");
    EXPECT_EQ(run("eval-ab --records " + dir.file("bad.jsonl")).exit_code, 2);

    EmbeddingTable rel(SectionTag::Embeddings, 2);
    EmbeddingTable attr(SectionTag::Embeddings, 2);
    rel.append("q", std::vector<float>{1, 0});
    attr.append("q", std::vector<float>{1, 0});
    rel.append("c", std::vector<float>{1, 0});
    attr.append("c", std::vector<float>{0, 1});
    save_rseb(rel, dir.file("rel.rseb"));
    save_rseb(attr, dir.file("attr.rseb"));
    r = run("quadrant --rel " + dir.file("rel.rseb") + " --attr " + dir.file("attr.rseb") +
            " --query-id q --mode absolute --rel-threshold 0.5 --attr-threshold 0.5");
    ASSERT_EQ(r.exit_code, 0);
    EXPECT_NE(r.out.find("c,1,0,SameLogicDifferentLook"), std::string::npos) << r.out;
    EXPECT_EQ(run("quadrant --rel " + dir.file("rel.rseb") + " --attr " + dir.file("attr.rseb") +
                  " --query-id q --mode absolute")
                  .exit_code,
              1);
}

TEST(Cli, Analogical) {
    Corpus c;
    const auto& d = c.dir;
    ASSERT_EQ(run("expand-groups --groups " + c.groups + " --out " + d.file("data.jsonl")).exit_code, 0);
    ASSERT_EQ(run("train --data " + d.file("data.jsonl") + " --image-emb " + c.base + " --text-emb " + c.captions +
                  " --steps 20 --out " + d.file("model.rseb") + " --log " + d.file("log.jsonl"))
                  .exit_code,
              0);
    write(d.file("pairs.jsonl"),
          "{\"model\":\"same-group\",\"input\":\"group_00_img_00\",\"output\":\"group_00_img_01\"}\n"
          "{\"model\":\"same-group\",\"input\":\"group_01_img_00\",\"output\":\"group_01_img_01\"}\n"
          "{\"model\":\"cross-group\",\"input\":\"group_00_img_00\",\"output\":\"group_05_img_01\"}\n");
    const auto r = run("analogical --pairs " + d.file("pairs.jsonl") + " --model " + d.file("model.rseb") +
                       " --rel-emb " + c.base + " --attr-emb " + c.base);
    ASSERT_EQ(r.exit_code, 0);
    EXPECT_NE(r.out.find("same-group"), std::string::npos);
    EXPECT_NE(r.out.find("cross-group"), std::string::npos);
}

}  // namespace
}  // namespace relsim
