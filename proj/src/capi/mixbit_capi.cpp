// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

#include "mixbit/mixbit.h"

#include <cstring>
#include <memory>
#include <new>
#include <string>

#include <json.hpp>

#include "bd/bdmodel.hpp"
#include "error.hpp"
#include "net/checkpoint.hpp"
#include "numerics/parallel.hpp"
#include "run/config.hpp"
#include "run/pipeline.hpp"
#include "run/report.hpp"

struct mb_config {
    mixbit::RunConfig cfg;
};
struct mb_dataset {
    mixbit::Dataset data;
};
struct mb_net {
    mixbit::MixedPrecNet net;
};
struct mb_plan {
    mixbit::NetworkPlan plan;
};
struct mb_bd_model {
    mixbit::BDModel model;
};

namespace {

thread_local std::string g_last_error;

mb_status status_for(mixbit::ErrorKind kind)
{
    using mixbit::ErrorKind;
    switch (kind) {
    case ErrorKind::InvalidArgument: return MB_ERR_INVALID_ARGUMENT;
    case ErrorKind::Config: return MB_ERR_CONFIG;
    case ErrorKind::Io: return MB_ERR_IO;
    case ErrorKind::Format: return MB_ERR_FORMAT;
    case ErrorKind::Numeric: return MB_ERR_NUMERIC;
    case ErrorKind::State: return MB_ERR_STATE;
    case ErrorKind::Infeasible: return MB_ERR_INFEASIBLE;
    }
    return MB_ERR_INTERNAL;
}

template <typename Fn>
mb_status guarded(Fn&& fn)
{
    try {
        fn();
        g_last_error.clear();
        return MB_OK;
    } catch (const mixbit::Error& e) {
        g_last_error = e.what();
        return status_for(e.kind());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return MB_ERR_INTERNAL;
    } catch (const std::filesystem::filesystem_error& e) {
        g_last_error = e.what();
        return MB_ERR_IO;
    } catch (const std::exception& e) {
        g_last_error = std::string("internal error: ") + e.what();
        return MB_ERR_INTERNAL;
    }
}

void need(const void* p, const char* what)
{
    mixbit::require(p != nullptr, mixbit::ErrorKind::InvalidArgument, std::string(what) + " must not be NULL");
}

} // namespace

extern "C" {

const char* mb_last_error(void) { return g_last_error.c_str(); }

const char* mb_status_name(mb_status status)
{
    switch (status) {
    case MB_OK: return "ok";
    case MB_ERR_INVALID_ARGUMENT: return "invalid argument";
    case MB_ERR_CONFIG: return "config error";
    case MB_ERR_IO: return "i/o error";
    case MB_ERR_FORMAT: return "format error";
    case MB_ERR_NUMERIC: return "numeric error";
    case MB_ERR_STATE: return "state error";
    case MB_ERR_INFEASIBLE: return "infeasible";
    case MB_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

const char* mb_version(void) { return "0.1.0"; }

void mb_set_threads(int n) { mixbit::set_thread_count(n < 1 ? 1 : n); }

mb_status mb_config_load(const char* path, mb_config** out)
{
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = new mb_config{mixbit::load_config(path)};
    });
}

mb_status mb_config_parse(const char* json_text, mb_config** out)
{
    return guarded([&] {
        need(json_text, "json_text");
        need(out, "out");
        *out = new mb_config{mixbit::parse_config_text(json_text)};
    });
}

mb_status mb_config_set(mb_config* config, const char* key, const char* value)
{
    return guarded([&] {
        need(config, "config");
        need(key, "key");
        need(value, "value");
        mixbit::set_config_value(config->cfg, key, value);
    });
}

mb_status mb_config_dump(const mb_config* config, char* buf, size_t cap, size_t* needed)
{
    return guarded([&] {
        need(config, "config");
        const std::string text = mixbit::config_to_json(config->cfg).dump(2);
        if (needed)
            *needed = text.size() + 1;
        if (buf && cap > 0) {
            const std::size_t n = std::min(cap - 1, text.size());
            std::memcpy(buf, text.data(), n);
            buf[n] = '\0';
        }
    });
}

const char* mb_config_out_dir(const mb_config* config) { return config ? config->cfg.out_dir.c_str() : ""; }

void mb_config_free(mb_config* config) { delete config; }

mb_status mb_dataset_from_config(const mb_config* config, mb_dataset** out)
{
    return guarded([&] {
        need(config, "config");
        need(out, "out");
        *out = new mb_dataset{mixbit::load_dataset(config->cfg.dataset)};
    });
}

mb_status mb_dataset_synthetic(int classes, size_t per_class, size_t hw, uint64_t seed, size_t test_per_class,
                               mb_dataset** out)
{
    return guarded([&] {
        need(out, "out");
        *out = new mb_dataset{mixbit::gen_synthetic(classes, per_class, hw, seed, test_per_class)};
    });
}

mb_status mb_dataset_load_cifar10(const char* dir, int normalize, size_t subset, uint64_t seed, mb_dataset** out)
{
    return guarded([&] {
        need(dir, "dir");
        need(out, "out");
        *out = new mb_dataset{mixbit::load_cifar10(dir, normalize != 0, subset, seed)};
    });
}

size_t mb_dataset_count(const mb_dataset* data, const char* split)
{
    if (!data || !split)
        return 0;
    auto it = data->data.splits.find(split);
    return it == data->data.splits.end() ? 0 : it->second.size();
}

mb_status mb_dataset_labels(const mb_dataset* data, const char* split, int32_t* out, size_t cap)
{
    return guarded([&] {
        need(data, "data");
        need(split, "split");
        need(out, "out");
        const auto& idx = data->data.split(split);
        mixbit::require(cap >= idx.size(), mixbit::ErrorKind::InvalidArgument, "label buffer too small");
        for (std::size_t i = 0; i < idx.size(); ++i)
            out[i] = data->data.labels[idx[i]];
    });
}

void mb_dataset_free(mb_dataset* data) { delete data; }

mb_status mb_net_create(const char* arch, int classes, const int* bits, size_t nbits, uint64_t seed, size_t input_hw,
                        mb_net** out)
{
    return guarded([&] {
        need(arch, "arch");
        need(out, "out");
        mixbit::BitwidthSet set;
        if (bits && nbits > 0)
            set = mixbit::BitwidthSet(std::vector<int>(bits, bits + nbits));
        *out = new mb_net{mixbit::MixedPrecNet::build(arch, classes, set, seed, input_hw)};
    });
}

mb_status mb_net_from_config(const mb_config* config, const mb_dataset* data, mb_net** out)
{
    return guarded([&] {
        need(config, "config");
        need(data, "data");
        need(out, "out");
        *out = new mb_net{mixbit::build_net(config->cfg, data->data.num_classes, data->data.height)};
    });
}

mb_status mb_net_load(const char* path, mb_net** out)
{
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = new mb_net{mixbit::load_checkpoint(path)};
    });
}

mb_status mb_net_save(const mb_net* net, const char* path)
{
    return guarded([&] {
        need(net, "net");
        need(path, "path");
        mixbit::save_checkpoint(net->net, path);
    });
}

size_t mb_net_quantized_layers(const mb_net* net) { return net ? net->net.quantized_layer_count() : 0; }

void mb_net_free(mb_net* net) { delete net; }

mb_status mb_plan_parse(const char* spec, size_t quantized_layers, mb_plan** out)
{
    return guarded([&] {
        need(spec, "spec");
        need(out, "out");
        *out = new mb_plan{mixbit::parse_plan_spec(spec, quantized_layers)};
    });
}

mb_status mb_plan_save(const mb_plan* plan, const mb_net* net, const char* path)
{
    return guarded([&] {
        need(plan, "plan");
        need(net, "net");
        need(path, "path");
        const auto strengths = net->net.strengths();
        mixbit::write_plan_json(plan->plan, mixbit::quantized_layer_names(net->net), strengths, net->net.bits(), path);
        std::filesystem::path dist(path);
        dist.replace_filename("distribution.csv");
        mixbit::write_distribution_csv(plan->plan, dist);
    });
}

size_t mb_plan_layers(const mb_plan* plan) { return plan ? plan->plan.layers.size() : 0; }

mb_status mb_plan_get(const mb_plan* plan, size_t layer, int* weight_bits, int* act_bits)
{
    return guarded([&] {
        need(plan, "plan");
        mixbit::require(layer < plan->plan.layers.size(), mixbit::ErrorKind::InvalidArgument,
                        "plan layer index out of range");
        if (weight_bits)
            *weight_bits = plan->plan.layers[layer].weight_bits;
        if (act_bits)
            *act_bits = plan->plan.layers[layer].act_bits;
    });
}

void mb_plan_free(mb_plan* plan) { delete plan; }

mb_status mb_search(mb_net* net, const mb_dataset* data, const mb_config* config, const char* out_dir,
                    mb_plan** plan_out, mb_search_summary* summary)
{
    return guarded([&] {
        need(net, "net");
        need(data, "data");
        need(config, "config");
        std::optional<std::filesystem::path> dir;
        if (out_dir)
            dir = out_dir;
        const auto r = mixbit::search_stage(net->net, data->data, config->cfg, dir);
        if (summary) {
            summary->epochs_run = r.search.history.size();
            summary->best_epoch = r.search.best_epoch;
            summary->best_valid_acc = r.search.best_valid_acc;
            summary->target_mflops = r.target_mflops;
            summary->plan_mflops = r.plan_mflops;
        }
        if (plan_out)
            *plan_out = new mb_plan{r.search.plan};
    });
}

mb_status mb_select(const mb_net* net, mb_plan** out)
{
    return guarded([&] {
        need(net, "net");
        need(out, "out");
        *out = new mb_plan{mixbit::select_plan(net->net.strengths(), net->net.bits())};
    });
}

mb_status mb_retrain(mb_net* net, const mb_dataset* data, const mb_plan* plan, const mb_config* config,
                     mb_retrain_summary* summary)
{
    return guarded([&] {
        need(net, "net");
        need(data, "data");
        need(plan, "plan");
        need(config, "config");
        const auto m = mixbit::retrain(net->net, data->data, plan->plan, mixbit::effective_retrain_config(config->cfg));
        if (summary) {
            summary->epochs_run = m.epochs_run;
            summary->final_train_loss = m.final_train_loss;
            summary->train_accuracy = m.train_accuracy;
            summary->test_accuracy = m.test_accuracy;
            summary->low_bit = m.low_bit ? 1 : 0;
        }
    });
}

mb_status mb_net_copy_weights(const mb_net* src, mb_net* dst)
{
    return guarded([&] {
        need(src, "src");
        need(dst, "dst");
        mixbit::copy_weights(src->net, dst->net);
    });
}

mb_status mb_evaluate(mb_net* net, const mb_dataset* data, const char* split, double* accuracy, int32_t* predictions,
                      size_t cap)
{
    return guarded([&] {
        need(net, "net");
        need(data, "data");
        need(split, "split");
        const auto& idx = data->data.split(split);
        const auto r = mixbit::evaluate(net->net, data->data, idx);
        if (accuracy)
            *accuracy = r.accuracy;
        if (predictions) {
            mixbit::require(cap >= r.predictions.size(), mixbit::ErrorKind::InvalidArgument,
                            "prediction buffer too small");
            std::copy(r.predictions.begin(), r.predictions.end(), predictions);
        }
    });
}

mb_status mb_bd_export(const mb_net* net, const char* path)
{
    return guarded([&] {
        need(net, "net");
        need(path, "path");
        mixbit::write_bd_model(mixbit::export_bd_model(net->net), path);
    });
}

mb_status mb_bd_load(const char* path, mb_bd_model** out)
{
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = new mb_bd_model{mixbit::read_bd_model(path)};
    });
}

size_t mb_bd_layers(const mb_bd_model* model) { return model ? model->model.layers.size() : 0; }

mb_status mb_bd_infer(const mb_bd_model* model, const mb_dataset* data, const char* split, int32_t* predictions,
                      size_t cap, double* logits, size_t logits_cap)
{
    return guarded([&] {
        need(model, "model");
        need(data, "data");
        need(split, "split");
        const mixbit::Tensor out = mixbit::bd_infer_split(model->model, data->data, split);
        if (predictions) {
            const auto pred = mixbit::argmax_rows(out);
            mixbit::require(cap >= pred.size(), mixbit::ErrorKind::InvalidArgument, "prediction buffer too small");
            std::copy(pred.begin(), pred.end(), predictions);
        }
        if (logits) {
            mixbit::require(logits_cap >= out.size(), mixbit::ErrorKind::InvalidArgument, "logit buffer too small");
            std::copy(out.data().begin(), out.data().end(), logits);
        }
    });
}

void mb_bd_free(mb_bd_model* model) { delete model; }

mb_status mb_flops(const mb_net* net, const mb_plan* plan, const char* cost_csv, double* mflops)
{
    return guarded([&] {
        need(net, "net");
        const auto costs = net->net.layer_costs();
        const double f = plan ? mixbit::network_flops(plan->plan, costs) : mixbit::full_precision_flops(costs);
        if (mflops)
            *mflops = f / mixbit::kMega;
        if (cost_csv)
            mixbit::write_cost_csv(costs, plan ? &plan->plan : nullptr, cost_csv);
    });
}

mb_status mb_random_plan(const mb_net* net, double lo_mflops, double hi_mflops, uint64_t seed, mb_plan** out)
{
    return guarded([&] {
        need(net, "net");
        need(out, "out");
        mixbit::Rng rng(seed);
        const auto costs = net->net.layer_costs();
        *out = new mb_plan{mixbit::sample_random_plan(net->net.bits(), costs, lo_mflops * mixbit::kMega,
                                                      hi_mflops * mixbit::kMega, rng)};
    });
}

mb_status mb_bench_kernel(size_t c_in, size_t c_out, size_t kernel, size_t out_hw, int weight_bits, int act_bits,
                          size_t reps, mb_bench_result* out)
{
    return guarded([&] {
        need(out, "out");
        const auto kb = mixbit::bench_kernel(c_in, c_out, kernel, out_hw, weight_bits, act_bits, reps);
        out->median_ns = kb.median_ns;
        out->and_word_ops = kb.and_word_ops;
        out->shift_adds = kb.shift_adds;
    });
}

mb_status mb_gradcheck(uint64_t seed, int stochastic, size_t coords, mb_gradcheck_result* out)
{
    return guarded([&] {
        need(out, "out");
        const auto r = mixbit::gradient_check(seed, stochastic != 0, coords ? coords : 100);
        out->r_error = r.r_error;
        out->s_error = r.s_error;
        out->alpha_error = r.alpha_error;
        out->coords = r.alpha_coords;
    });
}

mb_status mb_write_manifest(const mb_config* config, const char* command, const char* path)
{
    return guarded([&] {
        need(config, "config");
        need(command, "command");
        need(path, "path");
        mixbit::write_manifest(config->cfg, command, path);
    });
}

mb_status mb_write_predictions(const char* path, const int32_t* predictions, const int32_t* labels, size_t n)
{
    return guarded([&] {
        need(path, "path");
        need(predictions, "predictions");
        need(labels, "labels");
        mixbit::write_predictions_csv({predictions, n}, {labels, n}, path);
    });
}

} // extern "C"
