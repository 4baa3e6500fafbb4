// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

// Exercises the library strictly through the public C header.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <mixbit/mixbit.h>

namespace fs = std::filesystem;

namespace {

const char* kConfig = R"({
  "dataset": {"kind": "synthetic", "classes": 10, "per_class": 8, "test_per_class": 4, "hw": 16, "seed": 3},
  "arch": "tinynet", "bits": [1, 2, 3, 4, 5], "mode": "det", "lambda": 0.06,
  "target_fraction": 0.3, "seed": 11,
  "search": {"epochs": 2, "batch_size": 32},
  "retrain": {"epochs": 2, "batch_size": 32}
})";

fs::path scratch(const char* name)
{
    const fs::path p = fs::current_path() / "capi_work" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

} // namespace

TEST_CASE("status names, version, null handles")
{
    CHECK(std::string(mb_status_name(MB_OK)) == "ok");
    CHECK(std::strlen(mb_status_name(MB_ERR_CONFIG)) > 0);
    CHECK(std::strlen(mb_version()) > 0);

    mb_config* cfg = nullptr;
    CHECK(mb_config_parse(nullptr, &cfg) == MB_ERR_INVALID_ARGUMENT);
    CHECK(cfg == nullptr);
    CHECK(std::strlen(mb_last_error()) > 0);
    CHECK(mb_config_parse(kConfig, nullptr) == MB_ERR_INVALID_ARGUMENT);
    CHECK(mb_net_quantized_layers(nullptr) == 0);
    CHECK(mb_dataset_count(nullptr, "train") == 0);

    // Freeing NULL handles is a no-op.
    mb_config_free(nullptr);
    mb_dataset_free(nullptr);
    mb_net_free(nullptr);
    mb_plan_free(nullptr);
    mb_bd_free(nullptr);

    CHECK(mb_config_parse(kConfig, &cfg) == MB_OK);
    CHECK(std::string(mb_last_error()).empty());
    mb_config_free(cfg);
}

TEST_CASE("config errors map to status codes")
{
    mb_config* cfg = nullptr;
    CHECK(mb_config_parse("{\"target_fraction\": 0.3, \"bogus\": 1}", &cfg) == MB_ERR_CONFIG);
    CHECK(std::string(mb_last_error()).find("bogus") != std::string::npos);
    CHECK(mb_config_parse("{", &cfg) == MB_ERR_CONFIG);
    CHECK(mb_config_load("/nonexistent/mixbit.json", &cfg) != MB_OK);

    REQUIRE(mb_config_parse(kConfig, &cfg) == MB_OK);
    CHECK(mb_config_set(cfg, "search.epochs", "5") == MB_OK);
    CHECK(mb_config_set(cfg, "search.epochz", "5") == MB_ERR_CONFIG);
    CHECK(mb_config_set(cfg, "lambda", "-2") == MB_ERR_CONFIG);

    size_t needed = 0;
    CHECK(mb_config_dump(cfg, nullptr, 0, &needed) == MB_OK);
    CHECK(needed > 10);
    std::vector<char> buf(needed + 1);
    CHECK(mb_config_dump(cfg, buf.data(), buf.size(), &needed) == MB_OK);
    const std::string text(buf.data());
    CHECK(text.size() + 1 == needed);
    CHECK(text.find("\"epochs\": 5") != std::string::npos);

    // The dump parses back to the same canonical text.
    mb_config* again = nullptr;
    REQUIRE(mb_config_parse(text.c_str(), &again) == MB_OK);
    std::vector<char> buf2(needed + 1);
    CHECK(mb_config_dump(again, buf2.data(), buf2.size(), &needed) == MB_OK);
    CHECK(text == std::string(buf2.data()));
    mb_config_free(again);
    mb_config_free(cfg);
}

TEST_CASE("networks, plans and FLOPs")
{
    mb_net* net = nullptr;
    const int bits[] = {1, 2, 3, 4, 5};
    CHECK(mb_net_create("vgg", 10, bits, 5, 1, 0, &net) == MB_ERR_CONFIG);
    REQUIRE(mb_net_create("resnet20", 10, bits, 5, 1, 0, &net) == MB_OK);
    const size_t q = mb_net_quantized_layers(net);
    CHECK(q > 0);

    double full = 0.0, five = 0.0;
    CHECK(mb_flops(net, nullptr, nullptr, &full) == MB_OK);
    CHECK(full == doctest::Approx(40.81).epsilon(0.03));
    mb_plan* plan = nullptr;
    REQUIRE(mb_plan_parse("uniform:5", q, &plan) == MB_OK);
    CHECK(mb_plan_layers(plan) == q);
    int wb = 0, xb = 0;
    CHECK(mb_plan_get(plan, 0, &wb, &xb) == MB_OK);
    CHECK(wb == 5);
    CHECK(xb == 5);
    CHECK(mb_plan_get(plan, q, &wb, &xb) == MB_ERR_INVALID_ARGUMENT);
    CHECK(mb_flops(net, plan, nullptr, &five) == MB_OK);
    CHECK(five == doctest::Approx(17.8).epsilon(0.15));
    mb_plan_free(plan);

    mb_plan* bad = nullptr;
    CHECK(mb_plan_parse("uniform:0", q, &bad) == MB_ERR_CONFIG);
    CHECK(mb_plan_parse("missing-plan.json", q, &bad) != MB_OK);
    CHECK(bad == nullptr);

    mb_plan* rnd = nullptr;
    REQUIRE(mb_random_plan(net, 5.0, 7.0, 4, &rnd) == MB_OK);
    double r = 0.0;
    CHECK(mb_flops(net, rnd, nullptr, &r) == MB_OK);
    CHECK(r >= 5.0);
    CHECK(r <= 7.0);
    mb_plan_free(rnd);
    CHECK(mb_random_plan(net, 0.001, 0.002, 4, &rnd) == MB_ERR_INFEASIBLE);
    mb_net_free(net);
}

TEST_CASE("search, select, retrain, evaluate, binary decomposition")
{
    const fs::path dir = scratch("pipeline");
    mb_config* cfg = nullptr;
    REQUIRE(mb_config_parse(kConfig, &cfg) == MB_OK);
    mb_dataset* data = nullptr;
    REQUIRE(mb_dataset_from_config(cfg, &data) == MB_OK);
    CHECK(mb_dataset_count(data, "train") == 80);
    CHECK(mb_dataset_count(data, "test") == 40);
    CHECK(mb_dataset_count(data, "nope") == 0);

    mb_net* net = nullptr;
    REQUIRE(mb_net_from_config(cfg, data, &net) == MB_OK);
    CHECK(mb_net_quantized_layers(net) == 3);

    mb_plan* searched = nullptr;
    mb_search_summary ss{};
    REQUIRE(mb_search(net, data, cfg, (dir / "search").c_str(), &searched, &ss) == MB_OK);
    CHECK(ss.epochs_run == 2);
    CHECK(ss.target_mflops > 0.0);
    CHECK(fs::exists(dir / "search" / "history.csv"));
    CHECK(fs::exists(dir / "search" / "plan.json"));

    mb_plan* selected = nullptr;
    REQUIRE(mb_select(net, &selected) == MB_OK);
    REQUIRE(mb_plan_layers(selected) == 3);

    REQUIRE(mb_net_save(net, (dir / "search.json").c_str()) == MB_OK);
    mb_net* reloaded = nullptr;
    REQUIRE(mb_net_load((dir / "search.json").c_str(), &reloaded) == MB_OK);
    mb_plan* reselected = nullptr;
    REQUIRE(mb_select(reloaded, &reselected) == MB_OK);
    for (size_t l = 0; l < 3; ++l) {
        int a = 0, b = 0, c = 0, d = 0;
        mb_plan_get(selected, l, &a, &b);
        mb_plan_get(reselected, l, &c, &d);
        CHECK(a == c);
        CHECK(b == d);
    }
    mb_plan_free(reselected);
    mb_net_free(reloaded);

    mb_plan* plan = nullptr;
    REQUIRE(mb_plan_parse((dir / "search" / "plan.json").c_str(), 3, &plan) == MB_OK);
    mb_retrain_summary rs{};
    REQUIRE(mb_retrain(net, data, plan, cfg, &rs) == MB_OK);
    CHECK(rs.epochs_run == 2);
    CHECK(rs.train_accuracy >= 0.0);

    const size_t n = mb_dataset_count(data, "test");
    std::vector<int32_t> preds(n), bd(n), labels(n);
    double acc = -1.0;
    CHECK(mb_evaluate(net, data, "test", &acc, preds.data(), n - 1) == MB_ERR_INVALID_ARGUMENT);
    REQUIRE(mb_evaluate(net, data, "test", &acc, preds.data(), n) == MB_OK);
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
    REQUIRE(mb_dataset_labels(data, "test", labels.data(), n) == MB_OK);

    REQUIRE(mb_bd_export(net, (dir / "model.mbbd").c_str()) == MB_OK);
    mb_bd_model* model = nullptr;
    REQUIRE(mb_bd_load((dir / "model.mbbd").c_str(), &model) == MB_OK);
    CHECK(mb_bd_layers(model) > 0);
    std::vector<double> logits(n * 10);
    REQUIRE(mb_bd_infer(model, data, "test", bd.data(), n, logits.data(), logits.size()) == MB_OK);
    CHECK(bd == preds);
    mb_bd_free(model);

    CHECK(mb_write_predictions((dir / "pred.csv").c_str(), preds.data(), labels.data(), n) == MB_OK);
    CHECK(fs::exists(dir / "pred.csv"));
    CHECK(mb_write_manifest(cfg, "retrain", (dir / "manifest.json").c_str()) == MB_OK);

    // Corrupted model file.
    {
        std::FILE* f = std::fopen((dir / "junk.mbbd").c_str(), "wb");
        std::fputs("not a model", f);
        std::fclose(f);
    }
    CHECK(mb_bd_load((dir / "junk.mbbd").c_str(), &model) == MB_ERR_FORMAT);

    mb_plan_free(plan);
    mb_plan_free(selected);
    mb_plan_free(searched);
    mb_net_free(net);
    mb_dataset_free(data);
    mb_config_free(cfg);
}

TEST_CASE("progressive weight copy")
{
    const int one[] = {5};
    const int all[] = {1, 2, 3, 4, 5};
    mb_net* a = nullptr;
    mb_net* b = nullptr;
    mb_net* r = nullptr;
    REQUIRE(mb_net_create("tinynet", 10, one, 1, 1, 16, &a) == MB_OK);
    REQUIRE(mb_net_create("tinynet", 10, all, 5, 2, 16, &b) == MB_OK);
    REQUIRE(mb_net_create("resnet20", 10, all, 5, 2, 0, &r) == MB_OK);
    CHECK(mb_net_copy_weights(a, b) == MB_OK);
    CHECK(mb_net_copy_weights(a, r) != MB_OK);
    mb_net_free(a);
    mb_net_free(b);
    mb_net_free(r);
}

TEST_CASE("kernel bench and gradient check")
{
    mb_bench_result r1{}, r2{};
    REQUIRE(mb_bench_kernel(16, 16, 3, 8, 1, 1, 10, &r1) == MB_OK);
    REQUIRE(mb_bench_kernel(16, 16, 3, 8, 1, 2, 10, &r2) == MB_OK);
    CHECK(r1.median_ns > 0.0);
    CHECK(r2.and_word_ops == 2 * r1.and_word_ops);
    CHECK(mb_bench_kernel(0, 16, 3, 8, 1, 1, 10, &r1) == MB_ERR_INVALID_ARGUMENT);

    mb_gradcheck_result g{};
    REQUIRE(mb_gradcheck(1, 0, 10, &g) == MB_OK);
    CHECK(g.r_error < 1e-4);
    CHECK(g.s_error < 1e-4);
    CHECK(g.coords == 10);
}
