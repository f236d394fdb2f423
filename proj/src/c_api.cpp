#include "topoclinic/topoclinic.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <set>
#include <string>
#include <vector>

#include "topoclinic/adjudication.hpp"
#include "topoclinic/corpus.hpp"
#include "topoclinic/error.hpp"
#include "topoclinic/fsutil.hpp"
#include "topoclinic/harness.hpp"
#include "topoclinic/metrics.hpp"

struct tc_config {
    topoclinic::RunConfig config;
    std::set<std::string> explicit_keys;
    std::optional<std::size_t> stop_after;
};

struct tc_corpus {
    topoclinic::CaseCorpus corpus;
};

struct tc_synonyms {
    topoclinic::SynonymTable table;
};

namespace {

using topoclinic::Error;
using topoclinic::ErrorCode;

thread_local std::string g_last_error;

tc_status fail(tc_status status, std::string message) {
    g_last_error = std::move(message);
    return status;
}

template <typename F>
tc_status guarded(F&& f) {
    try {
        f();
        return TC_OK;
    } catch (const Error& e) {
        return fail(static_cast<tc_status>(static_cast<int>(e.code())), e.what());
    } catch (const std::bad_alloc&) {
        return fail(TC_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(TC_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(TC_ERR_INTERNAL, "unknown exception");
    }
}

void require(const void* p, const char* what) {
    if (p == nullptr) throw Error(ErrorCode::kInvalidArgument, std::string(what) + " is NULL");
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out == nullptr) throw std::bad_alloc();
    std::memcpy(out, s.data(), s.size() + 1);
    return out;
}

std::vector<std::string> split_csv(std::string_view csv) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= csv.size()) {
        std::size_t end = csv.find(',', start);
        if (end == std::string_view::npos) end = csv.size();
        std::string item(topoclinic::trim(csv.substr(start, end - start)));
        if (!item.empty()) out.push_back(std::move(item));
        start = end + 1;
    }
    return out;
}

long long to_integer(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        long long v = std::stoll(value, &pos);
        if (pos == value.size()) return v;
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::kConfig, key + ": expected an integer, got \"" + value + "\"");
}

double to_number(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        double v = std::stod(value, &pos);
        if (pos == value.size()) return v;
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::kConfig, key + ": expected a number, got \"" + value + "\"");
}

void apply(tc_config& c, const std::string& key, const std::string& value) {
    auto& cfg = c.config;
    if (key == "dataset") cfg.dataset = value;
    else if (key == "format") cfg.format = topoclinic::parse_corpus_format(value);
    else if (key == "topologies") cfg.topologies = topoclinic::parse_topology_list(value);
    else if (key == "model") cfg.model = value;
    else if (key == "judge-model") cfg.judge_model = value;
    else if (key == "scorer") cfg.scorer = topoclinic::parse_scorer(value);
    else if (key == "templates") cfg.templates_dir = value;
    else if (key == "synonyms") cfg.synonyms_path = value;
    else if (key == "cases") cfg.case_ids = split_csv(value);
    else if (key == "provider") cfg.provider = topoclinic::parse_provider_kind(value);
    else if (key == "script") cfg.script_path = value;
    else if (key == "temperature") cfg.temperature = to_number(key, value);
    else if (key == "max-tokens") cfg.max_tokens = to_integer(key, value);
    else if (key == "out") cfg.out_dir = value;
    else if (key == "concurrency") cfg.concurrency = static_cast<int>(to_integer(key, value));
    else if (key == "rpm") cfg.requests_per_minute = to_number(key, value);
    else if (key == "cache") cfg.cache_dir = value;
    else if (key == "base-url") cfg.base_url = value;
    else if (key == "api-key") cfg.api_key = value;
    else if (key == "max-attempts") cfg.max_attempts = static_cast<int>(to_integer(key, value));
    else if (key == "stop-after") {
        long long n = to_integer(key, value);
        if (n < 0) throw Error(ErrorCode::kConfig, "stop-after must be >= 0");
        c.stop_after = static_cast<std::size_t>(n);
    } else {
        throw Error(ErrorCode::kConfig, "unknown configuration key \"" + key + "\"");
    }
    c.explicit_keys.insert(key);
}

topoclinic::RunHooks hooks_for(const tc_config* c) {
    topoclinic::RunHooks hooks;
    if (c != nullptr) hooks.stop_after_episodes = c->stop_after;
    return hooks;
}

void fill(const topoclinic::RunOutcome& in, tc_run_outcome* out) {
    if (out == nullptr) return;
    out->episodes_total = in.episodes_total;
    out->episodes_executed = in.episodes_executed;
    out->failed_episodes = in.failed_episodes;
    out->complete = in.complete ? 1 : 0;
}

std::string env_or_empty(const char* name) {
    const char* v = std::getenv(name);
    return v != nullptr ? std::string(v) : std::string();
}

}  // namespace

extern "C" {

const char* tc_version(void) { return "0.1.0"; }

const char* tc_status_name(tc_status status) {
    switch (status) {
        case TC_OK: return "OK";
        case TC_ERR_INTERNAL: return "InternalError";
        default: break;
    }
    int v = static_cast<int>(status);
    if (v >= static_cast<int>(ErrorCode::kParse) && v <= static_cast<int>(ErrorCode::kInvalidArgument)) {
        // error_code_name returns views of string literals.
        return topoclinic::error_code_name(static_cast<ErrorCode>(v)).data();
    }
    return "UnknownStatus";
}

const char* tc_last_error(void) { return g_last_error.c_str(); }

void tc_string_free(char* s) { std::free(s); }

tc_status tc_config_create(tc_config** out) {
    return guarded([&] {
        require(out, "out");
        auto* c = new tc_config();
        c->config.base_url = env_or_empty("TOPOCLINIC_BASE_URL");
        c->config.api_key = env_or_empty("TOPOCLINIC_API_KEY");
        *out = c;
    });
}

void tc_config_destroy(tc_config* config) { delete config; }

tc_status tc_config_set(tc_config* config, const char* key, const char* value) {
    return guarded([&] {
        require(config, "config");
        require(key, "key");
        require(value, "value");
        apply(*config, key, value);
    });
}

tc_status tc_run(const tc_config* config, tc_run_outcome* outcome) {
    return guarded([&] {
        require(config, "config");
        fill(topoclinic::run_experiment(config->config, hooks_for(config)), outcome);
    });
}

tc_status tc_resume(const char* out_dir, const tc_config* overrides, tc_run_outcome* outcome) {
    return guarded([&] {
        require(out_dir, "out_dir");
        topoclinic::ResumeOptions opts;
        if (overrides != nullptr) {
            const auto& cfg = overrides->config;
            auto has = [&](const char* k) { return overrides->explicit_keys.count(k) > 0; };
            if (has("model")) opts.model = cfg.model;
            if (has("judge-model")) opts.judge_model = cfg.judge_model;
            if (has("dataset")) opts.dataset = cfg.dataset;
            if (has("format")) opts.format = cfg.format;
            if (has("topologies")) opts.topologies = cfg.topologies;
            if (has("scorer")) opts.scorer = cfg.scorer;
            if (has("templates")) opts.templates_dir = cfg.templates_dir;
            if (has("concurrency")) opts.concurrency = cfg.concurrency;
            if (has("rpm")) opts.requests_per_minute = cfg.requests_per_minute;
            if (has("cache")) opts.cache_dir = cfg.cache_dir;
            if (!cfg.base_url.empty()) opts.base_url = cfg.base_url;
            if (!cfg.api_key.empty()) opts.api_key = cfg.api_key;
        } else {
            if (auto v = env_or_empty("TOPOCLINIC_BASE_URL"); !v.empty()) opts.base_url = v;
            if (auto v = env_or_empty("TOPOCLINIC_API_KEY"); !v.empty()) opts.api_key = v;
        }
        fill(topoclinic::resume_experiment(out_dir, opts, hooks_for(overrides)), outcome);
    });
}

tc_status tc_score(const char* out_dir, const tc_config* overrides, tc_run_outcome* outcome) {
    return guarded([&] {
        require(out_dir, "out_dir");
        topoclinic::ScoreOptions opts;
        if (overrides != nullptr) {
            const auto& cfg = overrides->config;
            auto has = [&](const char* k) { return overrides->explicit_keys.count(k) > 0; };
            if (has("scorer")) opts.scorer = cfg.scorer;
            if (has("synonyms")) opts.synonyms_path = cfg.synonyms_path;
            if (has("judge-model")) opts.judge_model = cfg.judge_model;
            if (has("cache")) opts.cache_dir = cfg.cache_dir;
            if (has("concurrency")) opts.concurrency = cfg.concurrency;
            if (!cfg.base_url.empty()) opts.base_url = cfg.base_url;
            if (!cfg.api_key.empty()) opts.api_key = cfg.api_key;
        } else {
            if (auto v = env_or_empty("TOPOCLINIC_BASE_URL"); !v.empty()) opts.base_url = v;
            if (auto v = env_or_empty("TOPOCLINIC_API_KEY"); !v.empty()) opts.api_key = v;
        }
        fill(topoclinic::score_run(out_dir, opts, hooks_for(overrides)), outcome);
    });
}

tc_status tc_report(const char* out_dir, const char* format) {
    return guarded([&] {
        require(out_dir, "out_dir");
        require(format, "format");
        topoclinic::emit_report(out_dir, topoclinic::parse_report_format(format));
    });
}

tc_status tc_compare(const char* const* dirs, size_t n_dirs, char** out_table) {
    return guarded([&] {
        require(dirs, "dirs");
        require(out_table, "out_table");
        std::vector<std::filesystem::path> paths;
        for (size_t i = 0; i < n_dirs; ++i) {
            require(dirs[i], "dirs[i]");
            paths.emplace_back(dirs[i]);
        }
        *out_table = dup_string(topoclinic::render_compare_table(topoclinic::compare_runs(paths)));
    });
}

tc_status tc_corpus_load(const char* path, const char* format, tc_corpus** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        auto fmt = format != nullptr ? topoclinic::parse_corpus_format(format)
                                     : topoclinic::CorpusFormat::kCanonicalJson;
        *out = new tc_corpus{topoclinic::load_cases(path, fmt)};
    });
}

size_t tc_corpus_size(const tc_corpus* corpus) { return corpus != nullptr ? corpus->corpus.size() : 0; }

size_t tc_corpus_category_count(const tc_corpus* corpus) {
    if (corpus == nullptr) return 0;
    try {
        return topoclinic::stratify(corpus->corpus).size();
    } catch (...) {
        return 0;
    }
}

tc_status tc_corpus_serialize(const tc_corpus* corpus, char** out) {
    return guarded([&] {
        require(corpus, "corpus");
        require(out, "out");
        *out = dup_string(topoclinic::serialize_cases(corpus->corpus));
    });
}

void tc_corpus_destroy(tc_corpus* corpus) { delete corpus; }

tc_status tc_synonyms_load(const char* path, tc_synonyms** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = new tc_synonyms{topoclinic::SynonymTable::load(path)};
    });
}

void tc_synonyms_destroy(tc_synonyms* table) { delete table; }

tc_status tc_judge_exact(const char* prediction, const char* truth, const tc_synonyms* table,
                         int* out_score) {
    return guarded([&] {
        require(prediction, "prediction");
        require(truth, "truth");
        require(out_score, "out_score");
        static const topoclinic::SynonymTable empty;
        *out_score = topoclinic::judge_exact(prediction, truth, table != nullptr ? table->table : empty);
    });
}

tc_status tc_parse_judge_output(const char* text, int* out_score) {
    return guarded([&] {
        require(text, "text");
        require(out_score, "out_score");
        *out_score = topoclinic::parse_judge_output(text);
    });
}

tc_status tc_normalize_text(const char* text, char** out) {
    return guarded([&] {
        require(text, "text");
        require(out, "out");
        *out = dup_string(topoclinic::normalize_text(text));
    });
}

tc_status tc_diagnostic_accuracy(const int* scores, size_t n, double* out_pct) {
    return guarded([&] {
        require(out_pct, "out_pct");
        if (n > 0) require(scores, "scores");
        *out_pct = topoclinic::diagnostic_accuracy(std::span<const int>(scores, n));
    });
}

tc_status tc_reasoning_recall(const int* hits, size_t n, double* out_pct) {
    return guarded([&] {
        require(out_pct, "out_pct");
        if (n > 0) require(hits, "hits");
        auto flags = std::make_unique<bool[]>(n > 0 ? n : 1);
        for (size_t i = 0; i < n; ++i) flags[i] = hits[i] != 0;
        *out_pct = topoclinic::reasoning_recall(std::span<const bool>(flags.get(), n));
    });
}

double tc_reasoning_gap(double recall_pct, double accuracy_pct) {
    return topoclinic::reasoning_gap(recall_pct, accuracy_pct);
}

}  // extern "C"
