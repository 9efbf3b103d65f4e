#include "kindsleep/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include <json.hpp>

#include "kindsleep/concepts.hpp"
#include "kindsleep/io.hpp"
#include "kindsleep/preprocess.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace kindsleep {

const char* kToolVersion = "0.1.0";

void ExperimentConfig::validate() const {
    synth.validate();
    for (const auto& c : ood) c.validate();
    slam.validate();
    regressor.validate();
    double sum = 0;
    for (double f : split) {
        if (f <= 0) throw ValidationError("ExperimentConfig: split fractions must be > 0");
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw ValidationError("ExperimentConfig: split fractions must sum to 1");
    for (double p : sweep_grid)
        if (p <= 0 || p > 100)
            throw ValidationError("ExperimentConfig: sweep percentages must be in (0,100]");
    for (double t : intervention_taus)
        if (t < 0) throw ValidationError("ExperimentConfig: intervention thresholds must be >= 0");
    if (ridge_lambda < 0) throw ValidationError("ExperimentConfig: ridge_lambda must be >= 0");
    if (bootstrap_n <= 0) throw ValidationError("ExperimentConfig: bootstrap_n must be > 0");
}

// ---------------------------------------------------------------------------
// Config JSON round-trip.
// ---------------------------------------------------------------------------

namespace {

json synth_to_json(const SynthConfig& c) {
    return {{"n_studies", c.n_studies},
            {"duration_s", c.duration_s},
            {"severity_mix", c.severity_mix},
            {"event_rate_ranges",
             {{c.event_rate_ranges[0].first, c.event_rate_ranges[0].second},
              {c.event_rate_ranges[1].first, c.event_rate_ranges[1].second},
              {c.event_rate_ranges[2].first, c.event_rate_ranges[2].second},
              {c.event_rate_ranges[3].first, c.event_rate_ranges[3].second}}},
            {"baseline_spo2_range", {c.baseline_spo2_range.first, c.baseline_spo2_range.second}},
            {"noise_sd", c.noise_sd},
            {"artifact_prob", c.artifact_prob},
            {"seed", c.seed},
            {"bmi_mean_by_severity", c.bmi_mean_by_severity}};
}

SynthConfig synth_from_json(const json& j) {
    SynthConfig c;
    c.n_studies = j.value("n_studies", c.n_studies);
    c.duration_s = j.value("duration_s", c.duration_s);
    if (j.contains("severity_mix")) {
        const auto v = j.at("severity_mix").get<std::vector<double>>();
        if (v.size() != 4) throw ValidationError("config: severity_mix needs 4 entries");
        std::copy(v.begin(), v.end(), c.severity_mix.begin());
    }
    if (j.contains("event_rate_ranges")) {
        const auto& r = j.at("event_rate_ranges");
        if (r.size() != 4) throw ValidationError("config: event_rate_ranges needs 4 pairs");
        for (std::size_t i = 0; i < 4; ++i)
            c.event_rate_ranges[i] = {r[i].at(0).get<double>(), r[i].at(1).get<double>()};
    }
    if (j.contains("baseline_spo2_range")) {
        const auto& r = j.at("baseline_spo2_range");
        c.baseline_spo2_range = {r.at(0).get<double>(), r.at(1).get<double>()};
    }
    c.noise_sd = j.value("noise_sd", c.noise_sd);
    c.artifact_prob = j.value("artifact_prob", c.artifact_prob);
    c.seed = j.value("seed", c.seed);
    if (j.contains("bmi_mean_by_severity")) {
        const auto v = j.at("bmi_mean_by_severity").get<std::vector<double>>();
        if (v.size() != 4) throw ValidationError("config: bmi_mean_by_severity needs 4 entries");
        std::copy(v.begin(), v.end(), c.bmi_mean_by_severity.begin());
    }
    return c;
}

json slam_to_json(const SlamConfig& c) {
    return {{"input_len", c.input_len},
            {"n_conv_blocks", c.n_conv_blocks},
            {"filters_per_block", c.filters_per_block},
            {"kernel_sizes", c.kernel_sizes},
            {"pool_size", c.pool_size},
            {"pool_stride", c.pool_stride},
            {"leaky_slope", c.leaky_slope},
            {"lstm_hidden", c.lstm_hidden},
            {"dropout", c.dropout},
            {"attention_units", c.attention_units},
            {"lr", c.lr},
            {"weight_decay", c.weight_decay},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"seed", c.seed}};
}

SlamConfig slam_from_json(const json& j) {
    SlamConfig c;
    c.input_len = j.value("input_len", c.input_len);
    c.n_conv_blocks = j.value("n_conv_blocks", c.n_conv_blocks);
    c.filters_per_block = j.value("filters_per_block", c.filters_per_block);
    c.kernel_sizes = j.value("kernel_sizes", c.kernel_sizes);
    c.pool_size = j.value("pool_size", c.pool_size);
    c.pool_stride = j.value("pool_stride", c.pool_stride);
    c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
    c.lstm_hidden = j.value("lstm_hidden", c.lstm_hidden);
    c.dropout = j.value("dropout", c.dropout);
    c.attention_units = j.value("attention_units", c.attention_units);
    c.lr = j.value("lr", c.lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    return c;
}

json regressor_to_json(const RegressorConfig& c) {
    return {{"hidden_units", c.hidden_units}, {"l2_penalty", c.l2_penalty},
            {"lr", c.lr},                     {"lr_patience", c.lr_patience},
            {"max_epochs", c.max_epochs},     {"seed", c.seed}};
}

RegressorConfig regressor_from_json(const json& j) {
    RegressorConfig c;
    c.hidden_units = j.value("hidden_units", c.hidden_units);
    c.l2_penalty = j.value("l2_penalty", c.l2_penalty);
    c.lr = j.value("lr", c.lr);
    c.lr_patience = j.value("lr_patience", c.lr_patience);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.seed = j.value("seed", c.seed);
    return c;
}

}  // namespace

std::string experiment_config_to_json(const ExperimentConfig& c) {
    json j;
    j["synth"] = synth_to_json(c.synth);
    json ood = json::array();
    for (const auto& o : c.ood) ood.push_back(synth_to_json(o));
    j["ood"] = ood;
    j["split"] = c.split;
    j["seed"] = c.seed;
    j["slam"] = slam_to_json(c.slam);
    j["regressor"] = regressor_to_json(c.regressor);
    j["sweep_grid"] = c.sweep_grid;
    j["intervention_taus"] = c.intervention_taus;
    j["ridge_lambda"] = c.ridge_lambda;
    j["bootstrap_n"] = c.bootstrap_n;
    j["regressor_on_oracle_concepts"] = c.regressor_on_oracle_concepts;
    return j.dump(1);
}

ExperimentConfig experiment_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: invalid JSON: ") + e.what());
    }
    ExperimentConfig c;
    if (j.contains("synth")) c.synth = synth_from_json(j.at("synth"));
    if (j.contains("ood"))
        for (const auto& o : j.at("ood")) c.ood.push_back(synth_from_json(o));
    if (j.contains("split")) {
        const auto v = j.at("split").get<std::vector<double>>();
        if (v.size() != 3) throw ValidationError("config: split needs 3 fractions");
        std::copy(v.begin(), v.end(), c.split.begin());
    }
    c.seed = j.value("seed", c.seed);
    if (j.contains("slam")) c.slam = slam_from_json(j.at("slam"));
    if (j.contains("regressor")) c.regressor = regressor_from_json(j.at("regressor"));
    c.sweep_grid = j.value("sweep_grid", c.sweep_grid);
    c.intervention_taus = j.value("intervention_taus", c.intervention_taus);
    c.ridge_lambda = j.value("ridge_lambda", c.ridge_lambda);
    c.bootstrap_n = j.value("bootstrap_n", c.bootstrap_n);
    c.regressor_on_oracle_concepts =
        j.value("regressor_on_oracle_concepts", c.regressor_on_oracle_concepts);
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Splitting and data preparation.
// ---------------------------------------------------------------------------

Split split_cohort(const std::vector<SleepStudy>& studies,
                   const std::array<double, 3>& fractions, std::uint64_t seed) {
    double sum = 0;
    for (double f : fractions) {
        if (f <= 0) throw ValidationError("split_cohort: fractions must be > 0");
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw ValidationError("split_cohort: fractions must sum to 1");

    std::vector<std::size_t> order(studies.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    const auto n = studies.size();
    const std::size_t n_train =
        static_cast<std::size_t>(std::llround(fractions[0] * static_cast<double>(n)));
    const std::size_t n_val =
        static_cast<std::size_t>(std::llround(fractions[1] * static_cast<double>(n)));
    if (n_train == 0 || n_val == 0 || n_train + n_val >= n)
        throw ValidationError("split_cohort: a split would be empty");

    Split out;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& s = studies[order[i]];
        if (i < n_train) out.train.push_back(s);
        else if (i < n_train + n_val) out.val.push_back(s);
        else out.test.push_back(s);
    }
    return out;
}

StudyData prepare_study(const SleepStudy& study) {
    StudyData d;
    d.id = study.id;
    d.signal = preprocess_pipeline(study.signal, PreprocessConfig{});
    d.oracle = compute_concepts(study.events, study.signal, study.total_sleep_time_h);
    d.clinical = encode_clinical(study.clinical);
    d.ref_ahi = study.reference_ahi;
    d.bmi = study.clinical.bmi;
    d.events = study.events;
    return d;
}

std::vector<StudyData> prepare_studies(const std::vector<SleepStudy>& studies) {
    std::vector<StudyData> out;
    out.reserve(studies.size());
    for (const auto& s : studies) out.push_back(prepare_study(s));
    return out;
}

void fill_predictions(SlamModel& model, std::vector<StudyData>& data) {
    for (auto& d : data) d.predicted = predict_concepts(model, d.signal);
}

std::vector<double> fusion_features(const ConceptVector& concepts,
                                    const std::vector<double>& clinical) {
    std::vector<double> out;
    out.reserve(ConceptVector::kSize + clinical.size());
    for (double v : concepts.to_array()) out.push_back(v);
    out.insert(out.end(), clinical.begin(), clinical.end());
    return out;
}

// ---------------------------------------------------------------------------
// Arm training/evaluation.
// ---------------------------------------------------------------------------

namespace {

std::vector<SeverityClass> to_severities(const std::vector<double>& ahi) {
    std::vector<SeverityClass> out;
    out.reserve(ahi.size());
    for (double v : ahi) out.push_back(severity(v));
    return out;
}

ArmMetrics eval_on(const MlpRegressor& reg, const std::vector<StudyData>& test,
                   int bootstrap_n, std::uint64_t eval_seed) {
    ArmMetrics m;
    for (const auto& d : test) {
        m.ref_ahi.push_back(d.ref_ahi);
        m.pred_ahi.push_back(reg.predict(fusion_features(d.predicted, d.clinical)));
    }
    m.agreement = agreement_report(m.ref_ahi, m.pred_ahi);
    m.classification = classification_report(to_severities(m.ref_ahi),
                                             to_severities(m.pred_ahi), bootstrap_n, eval_seed);
    return m;
}

MlpRegressor train_arm_regressor(const std::vector<ConceptVector>& train_concepts,
                                 const std::vector<StudyData>& train,
                                 const std::vector<StudyData>& val,
                                 const RegressorConfig& cfg) {
    if (train_concepts.size() != train.size())
        throw ValidationError("experiment arm: concept/study count mismatch");
    std::vector<std::vector<double>> x, xv;
    std::vector<double> y, yv;
    for (std::size_t i = 0; i < train.size(); ++i) {
        x.push_back(fusion_features(train_concepts[i], train[i].clinical));
        y.push_back(train[i].ref_ahi);
    }
    for (const auto& d : val) {
        xv.push_back(fusion_features(d.predicted, d.clinical));
        yv.push_back(d.ref_ahi);
    }
    MlpRegressor reg;
    reg.train(x, y, xv, yv, cfg);
    return reg;
}

std::mt19937_64 arm_rng(std::uint64_t seed, std::uint64_t arm_id) {
    std::seed_seq seq{seed, arm_id};
    return std::mt19937_64(seq);
}

// Per-concept observed ranges over the training oracle concepts.
std::array<std::pair<double, double>, 10> concept_ranges(const std::vector<StudyData>& train) {
    std::array<std::pair<double, double>, 10> r;
    r.fill({std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()});
    for (const auto& d : train) {
        const auto a = d.oracle.to_array();
        for (std::size_t k = 0; k < 10; ++k) {
            r[k].first = std::min(r[k].first, a[k]);
            r[k].second = std::max(r[k].second, a[k]);
        }
    }
    return r;
}

// Random concepts for everyone, then pct_correct% (rounded) of subjects get
// their oracle vector back.
std::vector<ConceptVector> mixed_concepts(const std::vector<StudyData>& train,
                                          double pct_correct, std::mt19937_64& rng) {
    const auto ranges = concept_ranges(train);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<ConceptVector> out;
    out.reserve(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
        std::array<double, 10> a{};
        for (std::size_t k = 0; k < 10; ++k)
            a[k] = ranges[k].first + unit(rng) * (ranges[k].second - ranges[k].first);
        out.push_back(ConceptVector::from_array(a));
    }
    const auto n_correct = static_cast<std::size_t>(
        std::llround(pct_correct / 100.0 * static_cast<double>(train.size())));
    std::vector<std::size_t> idx(train.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i = 0; i < std::min(n_correct, idx.size()); ++i)
        out[idx[i]] = train[idx[i]].oracle;
    return out;
}

}  // namespace

ArmMetrics train_and_eval_arm(const std::vector<ConceptVector>& train_concepts,
                              const std::vector<StudyData>& train,
                              const std::vector<StudyData>& val,
                              const std::vector<StudyData>& test,
                              const RegressorConfig& reg_config, int bootstrap_n,
                              std::uint64_t eval_seed) {
    const MlpRegressor reg = train_arm_regressor(train_concepts, train, val, reg_config);
    return eval_on(reg, test, bootstrap_n, eval_seed);
}

PipelineResult run_pipeline(const ExperimentConfig& config) {
    config.validate();
    std::vector<std::vector<SleepStudy>> ood;
    for (const auto& oc : config.ood) ood.push_back(generate_cohort(oc));
    return run_pipeline(config, generate_cohort(config.synth), ood);
}

PipelineResult run_pipeline(const ExperimentConfig& config,
                            const std::vector<SleepStudy>& cohort,
                            const std::vector<std::vector<SleepStudy>>& ood_cohorts) {
    config.validate();
    const Split split = split_cohort(cohort, config.split, config.seed);

    PipelineResult result{SlamModel(config.slam), MlpRegressor{}, {}, {}, {}, {}, {}};
    result.train = prepare_studies(split.train);
    result.val = prepare_studies(split.val);
    result.test = prepare_studies(split.test);

    std::vector<std::vector<double>> train_sig, val_sig;
    std::vector<ConceptVector> train_tgt, val_tgt;
    for (const auto& d : result.train) {
        train_sig.push_back(d.signal);
        train_tgt.push_back(d.oracle);
    }
    for (const auto& d : result.val) {
        val_sig.push_back(d.signal);
        val_tgt.push_back(d.oracle);
    }
    result.slam = train_slam(train_sig, train_tgt, val_sig, val_tgt, config.slam);

    fill_predictions(result.slam, result.train);
    fill_predictions(result.slam, result.val);
    fill_predictions(result.slam, result.test);

    // With the oracle-concepts flag the ground-truth concepts stand in for the
    // model's wherever they would feed the regressor, evaluation included.
    auto as_oracle = [&](std::vector<StudyData> data) {
        if (config.regressor_on_oracle_concepts)
            for (auto& d : data) d.predicted = d.oracle;
        return data;
    };
    std::vector<ConceptVector> train_concepts;
    for (const auto& d : result.train)
        train_concepts.push_back(config.regressor_on_oracle_concepts ? d.oracle : d.predicted);
    result.regressor = train_arm_regressor(train_concepts, result.train,
                                           as_oracle(result.val), config.regressor);
    result.in_distribution =
        eval_on(result.regressor, as_oracle(result.test), config.bootstrap_n, config.seed);

    for (const auto& oc : ood_cohorts) {
        auto data = prepare_studies(oc);
        fill_predictions(result.slam, data);
        result.out_of_distribution.push_back(
            eval_on(result.regressor, as_oracle(data), config.bootstrap_n, config.seed));
    }
    return result;
}

std::vector<NamedArm> corruption_ablation(const ExperimentConfig& config,
                                          const PipelineResult& pipeline) {
    std::vector<NamedArm> arms;

    auto rng_a = arm_rng(config.seed, 1);
    const auto incorrect = mixed_concepts(pipeline.train, 0.0, rng_a);
    arms.push_back({"incorrect",
                    train_and_eval_arm(incorrect, pipeline.train, pipeline.val,
                                       pipeline.test, config.regressor, config.bootstrap_n,
                                       config.seed)});

    // Same random draws as the incorrect arm, with a 5% subset restored, so the
    // two arms differ only in the restored subjects.
    auto rng_b = arm_rng(config.seed, 2);
    auto partial = incorrect;
    {
        std::vector<std::size_t> idx(pipeline.train.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng_b);
        const auto n_correct = static_cast<std::size_t>(
            std::llround(0.05 * static_cast<double>(pipeline.train.size())));
        for (std::size_t i = 0; i < std::min(n_correct, idx.size()); ++i)
            partial[idx[i]] = pipeline.train[idx[i]].oracle;
    }
    arms.push_back({"incorrect_plus_5pct",
                    train_and_eval_arm(partial, pipeline.train, pipeline.val, pipeline.test,
                                       config.regressor, config.bootstrap_n, config.seed)});

    std::vector<ConceptVector> correct;
    for (const auto& d : pipeline.train) correct.push_back(d.oracle);
    arms.push_back({"correct",
                    train_and_eval_arm(correct, pipeline.train, pipeline.val, pipeline.test,
                                       config.regressor, config.bootstrap_n, config.seed)});

    auto rng_d = arm_rng(config.seed, 4);
    std::vector<ConceptVector> shuffled = correct;
    std::shuffle(shuffled.begin(), shuffled.end(), rng_d);
    arms.push_back({"shuffled_labels",
                    train_and_eval_arm(shuffled, pipeline.train, pipeline.val, pipeline.test,
                                       config.regressor, config.bootstrap_n, config.seed)});
    return arms;
}

std::vector<SweepRow> proportion_sweep(const ExperimentConfig& config,
                                       const PipelineResult& pipeline) {
    std::vector<SweepRow> rows;
    // One random-concept draw and one subject order shared across the whole
    // grid: the restored subsets nest, so only p varies between rows.
    auto rng = arm_rng(config.seed, 100);
    const auto randomized = mixed_concepts(pipeline.train, 0.0, rng);
    std::vector<std::size_t> idx(pipeline.train.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (double p : config.sweep_grid) {
        auto concepts = randomized;
        const auto n_correct = static_cast<std::size_t>(
            std::llround(p / 100.0 * static_cast<double>(pipeline.train.size())));
        for (std::size_t i = 0; i < std::min(n_correct, idx.size()); ++i)
            concepts[idx[i]] = pipeline.train[idx[i]].oracle;
        rows.push_back({p, train_and_eval_arm(concepts, pipeline.train, pipeline.val,
                                              pipeline.test, config.regressor,
                                              config.bootstrap_n, config.seed)});
    }
    return rows;
}

std::vector<InterventionRow> intervention_study(const ExperimentConfig& config,
                                                const PipelineResult& pipeline) {
    std::vector<InterventionRow> rows;
    for (double tau : config.intervention_taus) {
        // Interception models review of flagged concept errors, so it applies
        // wherever predicted concepts feed the regressor: train, val, and test.
        std::size_t intercepted = 0;
        std::vector<ConceptVector> concepts;
        for (const auto& d : pipeline.train) {
            if (std::abs(d.predicted.ahi_a0h4 - d.oracle.ahi_a0h4) > tau) {
                concepts.push_back(d.oracle);
                ++intercepted;
            } else {
                concepts.push_back(d.predicted);
            }
        }
        auto intercept = [&](std::vector<StudyData> data) {
            for (auto& d : data)
                if (std::abs(d.predicted.ahi_a0h4 - d.oracle.ahi_a0h4) > tau)
                    d.predicted = d.oracle;
            return data;
        };
        InterventionRow row;
        row.tau = tau;
        row.fraction_intercepted =
            static_cast<double>(intercepted) / static_cast<double>(pipeline.train.size());
        row.metrics = train_and_eval_arm(concepts, pipeline.train, intercept(pipeline.val),
                                         intercept(pipeline.test), config.regressor,
                                         config.bootstrap_n, config.seed);
        rows.push_back(row);
    }
    return rows;
}

std::vector<NamedArm> fusion_baselines(const ExperimentConfig& config,
                                       const PipelineResult& pipeline) {
    std::vector<NamedArm> arms;
    arms.push_back({"kindsleep", pipeline.in_distribution});

    auto signal_feats = [](const StudyData& d) { return summary_features(d.signal); };
    auto concat = [&](const StudyData& d) {
        auto f = signal_feats(d);
        f.insert(f.end(), d.clinical.begin(), d.clinical.end());
        return f;
    };

    auto collect = [&](auto&& fn, const std::vector<StudyData>& data,
                       std::vector<std::vector<double>>& x, std::vector<double>& y) {
        for (const auto& d : data) {
            x.push_back(fn(d));
            y.push_back(d.ref_ahi);
        }
    };

    // Feature level: one regressor on [signal summary || clinical].
    {
        std::vector<std::vector<double>> x, xv;
        std::vector<double> y, yv;
        collect(concat, pipeline.train, x, y);
        collect(concat, pipeline.val, xv, yv);
        MlpRegressor reg;
        reg.train(x, y, xv, yv, config.regressor);
        ArmMetrics m;
        for (const auto& d : pipeline.test) {
            m.ref_ahi.push_back(d.ref_ahi);
            m.pred_ahi.push_back(reg.predict(concat(d)));
        }
        m.agreement = agreement_report(m.ref_ahi, m.pred_ahi);
        m.classification =
            classification_report(to_severities(m.ref_ahi), to_severities(m.pred_ahi),
                                  config.bootstrap_n, config.seed);
        arms.push_back({"feature_level", m});
    }

    // Decision level: average of signal-only and clinical-only regressors.
    {
        std::vector<std::vector<double>> xs, xsv, xc, xcv;
        std::vector<double> y, yv;
        collect(signal_feats, pipeline.train, xs, y);
        collect([](const StudyData& d) { return d.clinical; }, pipeline.train, xc, y);
        y.resize(pipeline.train.size());  // collect appended twice
        for (std::size_t i = 0; i < pipeline.train.size(); ++i) y[i] = pipeline.train[i].ref_ahi;
        collect(signal_feats, pipeline.val, xsv, yv);
        collect([](const StudyData& d) { return d.clinical; }, pipeline.val, xcv, yv);
        yv.resize(pipeline.val.size());
        for (std::size_t i = 0; i < pipeline.val.size(); ++i) yv[i] = pipeline.val[i].ref_ahi;

        MlpRegressor sig_reg, clin_reg;
        sig_reg.train(xs, y, xsv, yv, config.regressor);
        clin_reg.train(xc, y, xcv, yv, config.regressor);
        ArmMetrics m;
        for (const auto& d : pipeline.test) {
            m.ref_ahi.push_back(d.ref_ahi);
            m.pred_ahi.push_back(
                0.5 * (sig_reg.predict(signal_feats(d)) + clin_reg.predict(d.clinical)));
        }
        m.agreement = agreement_report(m.ref_ahi, m.pred_ahi);
        m.classification =
            classification_report(to_severities(m.ref_ahi), to_severities(m.pred_ahi),
                                  config.bootstrap_n, config.seed);
        arms.push_back({"decision_level", m});
    }
    return arms;
}

std::vector<ImportanceRow> permutation_importance(
    const MlpRegressor& model, const std::vector<std::vector<double>>& features,
    const std::vector<double>& targets, const std::vector<std::string>& feature_names,
    const std::vector<std::string>& feature_groups, int repeats, std::uint64_t seed) {
    if (features.empty() || features.size() != targets.size())
        throw ValidationError("permutation_importance: empty or mismatched inputs");
    const std::size_t d = features[0].size();
    if (feature_names.size() != d || feature_groups.size() != d)
        throw ValidationError("permutation_importance: name/group count mismatch");
    if (repeats <= 0) throw ValidationError("permutation_importance: repeats must be > 0");

    const double baseline = mae(targets, model.predict_batch(features));

    std::mt19937_64 rng(seed);
    std::vector<ImportanceRow> rows;
    std::vector<std::size_t> perm(features.size());
    for (std::size_t j = 0; j < d; ++j) {
        double sum = 0;
        for (int r = 0; r < repeats; ++r) {
            std::iota(perm.begin(), perm.end(), 0);
            std::shuffle(perm.begin(), perm.end(), rng);
            auto permuted = features;
            for (std::size_t i = 0; i < permuted.size(); ++i)
                permuted[i][j] = features[perm[i]][j];
            sum += mae(targets, model.predict_batch(permuted));
        }
        rows.push_back({feature_names[j], feature_groups[j],
                        sum / static_cast<double>(repeats) - baseline});
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const auto& a, const auto& b) { return a.importance > b.importance; });
    return rows;
}

std::vector<ImportanceRow> pipeline_importance(const ExperimentConfig& config,
                                               const PipelineResult& pipeline, int repeats) {
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    for (const auto& d : pipeline.test) {
        x.push_back(fusion_features(d.predicted, d.clinical));
        y.push_back(d.ref_ahi);
    }
    std::vector<std::string> names, groups;
    for (const char* n : ConceptVector::names()) {
        names.emplace_back(n);
        groups.emplace_back("concept");
    }
    for (const auto& n : clinical_feature_names()) {
        names.push_back(n);
        groups.emplace_back("clinical");
    }
    return permutation_importance(pipeline.regressor, x, y, names, groups, repeats, config.seed);
}

// ---------------------------------------------------------------------------
// BMI stratification.
// ---------------------------------------------------------------------------

namespace {

// Two-sided permutation p-value for a correlation statistic.
double permutation_p(const std::vector<double>& x, const std::vector<double>& y,
                     double observed, int n_permutations, std::mt19937_64& rng,
                     double (*stat)(const std::vector<double>&, const std::vector<double>&)) {
    std::vector<double> shuffled = y;
    int extreme = 0;
    for (int i = 0; i < n_permutations; ++i) {
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        double s;
        try {
            s = stat(x, shuffled);
        } catch (const ValidationError&) {
            s = 0;
        }
        if (std::abs(s) >= std::abs(observed) - 1e-15) ++extreme;
    }
    return (1.0 + extreme) / (1.0 + n_permutations);
}

}  // namespace

BmiReport bmi_stratified_report(const std::vector<double>& ref_ahi,
                                const std::vector<SeverityClass>& ref_sev,
                                const std::vector<SeverityClass>& pred_sev,
                                const std::vector<double>& bmi, int n_permutations,
                                std::uint64_t seed) {
    const std::size_t n = ref_ahi.size();
    if (ref_sev.size() != n || pred_sev.size() != n || bmi.size() != n || n == 0)
        throw ValidationError("bmi_stratified_report: mismatched or empty inputs");

    BmiReport report;
    static const char* labels[3] = {"normal", "overweight", "obese"};
    for (int c = 0; c < 3; ++c) {
        std::vector<double> ahi_c;
        std::vector<SeverityClass> rs, ps;
        for (std::size_t i = 0; i < n; ++i) {
            const int cls = bmi[i] < 25.0 ? 0 : (bmi[i] < 30.0 ? 1 : 2);
            if (cls != c) continue;
            ahi_c.push_back(ref_ahi[i]);
            rs.push_back(ref_sev[i]);
            ps.push_back(pred_sev[i]);
        }
        auto& row = report.classes[static_cast<std::size_t>(c)];
        row.label = labels[c];
        row.n = ahi_c.size();
        if (ahi_c.size() < 2) continue;
        row.defined = true;
        const double m = std::accumulate(ahi_c.begin(), ahi_c.end(), 0.0) /
                         static_cast<double>(ahi_c.size());
        double v = 0;
        for (double a : ahi_c) v += (a - m) * (a - m);
        row.mean_ahi = m;
        row.sd_ahi = std::sqrt(v / static_cast<double>(ahi_c.size()));
        row.f1 = classification_report(rs, ps, 1000, seed).f1;
    }

    std::mt19937_64 rng(seed);
    try {
        report.pearson_r = pearson(bmi, ref_ahi);
        report.pearson_p =
            permutation_p(bmi, ref_ahi, report.pearson_r, n_permutations, rng, pearson);
    } catch (const ValidationError&) {
        report.pearson_r = 0;
        report.pearson_p = 1;
    }
    try {
        report.spearman_rho = spearman(bmi, ref_ahi);
        report.spearman_p =
            permutation_p(bmi, ref_ahi, report.spearman_rho, n_permutations, rng, spearman);
    } catch (const ValidationError&) {
        report.spearman_rho = 0;
        report.spearman_p = 1;
    }
    return report;
}

// ---------------------------------------------------------------------------
// Report writers.
// ---------------------------------------------------------------------------

namespace {

std::ofstream open_out(const fs::path& path) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

void write_metric_columns(std::ofstream& out, const ArmMetrics& m) {
    out << format_double(m.classification.f1.value) << ','
        << format_double(m.classification.precision.value) << ','
        << format_double(m.classification.sensitivity.value) << ','
        << format_double(m.classification.specificity.value) << ','
        << format_double(m.agreement.icc) << ',' << format_double(m.agreement.r2) << ','
        << format_double(m.agreement.mae) << ',' << format_double(m.agreement.rmse);
}

constexpr const char* kMetricHeader = "f1,precision,sensitivity,specificity,icc,r2,mae,rmse";

}  // namespace

void write_agreement_csv(const AgreementReport& r, const fs::path& path) {
    auto out = open_out(path);
    out << "r2,icc,mae,rmse,ba_bias,ba_loa_low,ba_loa_high,n\n";
    out << format_double(r.r2) << ',' << format_double(r.icc) << ',' << format_double(r.mae)
        << ',' << format_double(r.rmse) << ',' << format_double(r.bland_altman.bias) << ','
        << format_double(r.bland_altman.loa_low) << ','
        << format_double(r.bland_altman.loa_high) << ',' << r.n << '\n';
}

void write_classification_csv(const ClassificationReport& r, const fs::path& path) {
    auto out = open_out(path);
    out << "metric,value,ci_low,ci_high\n";
    auto row = [&](const char* name, const ScoreWithCi& s) {
        out << name << ',' << format_double(s.value) << ',' << format_double(s.ci_low) << ','
            << format_double(s.ci_high) << '\n';
    };
    row("weighted_f1", r.f1);
    row("weighted_precision", r.precision);
    row("weighted_sensitivity", r.sensitivity);
    row("weighted_specificity", r.specificity);
}

void write_confusion_csv(const ClassificationReport& r, const fs::path& path) {
    auto out = open_out(path);
    out << "reference,normal,mild,moderate,severe\n";
    static const char* names[4] = {"normal", "mild", "moderate", "severe"};
    for (int i = 0; i < 4; ++i) {
        out << names[i];
        for (int j = 0; j < 4; ++j)
            out << ','
                << r.confusion[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        out << '\n';
    }
}

void write_bland_altman_points_csv(const std::vector<double>& ref,
                                   const std::vector<double>& pred, const fs::path& path) {
    auto out = open_out(path);
    out << "mean,diff\n";
    for (std::size_t i = 0; i < ref.size(); ++i)
        out << format_double(0.5 * (ref[i] + pred[i])) << ','
            << format_double(pred[i] - ref[i]) << '\n';
}

void write_parity_points_csv(const std::vector<double>& ref, const std::vector<double>& pred,
                             const fs::path& path) {
    auto out = open_out(path);
    out << "ref,pred,severity\n";
    for (std::size_t i = 0; i < ref.size(); ++i)
        out << format_double(ref[i]) << ',' << format_double(pred[i]) << ','
            << to_string(severity(ref[i])) << '\n';
}

void write_arm_csv(const std::vector<NamedArm>& arms, const fs::path& path) {
    auto out = open_out(path);
    out << "arm," << kMetricHeader << '\n';
    for (const auto& a : arms) {
        out << a.name << ',';
        write_metric_columns(out, a.metrics);
        out << '\n';
    }
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const fs::path& path) {
    auto out = open_out(path);
    out << "p," << kMetricHeader << '\n';
    for (const auto& r : rows) {
        out << format_double(r.p) << ',';
        write_metric_columns(out, r.metrics);
        out << '\n';
    }
}

void write_intervention_csv(const std::vector<InterventionRow>& rows, const fs::path& path) {
    auto out = open_out(path);
    out << "tau,fraction_intercepted,f1,mae,rmse\n";
    for (const auto& r : rows)
        out << format_double(r.tau) << ',' << format_double(r.fraction_intercepted) << ','
            << format_double(r.metrics.classification.f1.value) << ','
            << format_double(r.metrics.agreement.mae) << ','
            << format_double(r.metrics.agreement.rmse) << '\n';
}

void write_importance_csv(const std::vector<ImportanceRow>& rows, const fs::path& path) {
    auto out = open_out(path);
    out << "feature,group,importance\n";
    for (const auto& r : rows)
        out << r.feature << ',' << r.group << ',' << format_double(r.importance) << '\n';
}

void write_bmi_csv(const BmiReport& report, const fs::path& path) {
    auto out = open_out(path);
    out << "class,n,mean_ahi,sd_ahi,f1,f1_ci_low,f1_ci_high\n";
    for (const auto& c : report.classes) {
        out << c.label << ',' << c.n << ',';
        if (c.defined)
            out << format_double(c.mean_ahi) << ',' << format_double(c.sd_ahi) << ','
                << format_double(c.f1.value) << ',' << format_double(c.f1.ci_low) << ','
                << format_double(c.f1.ci_high) << '\n';
        else
            out << "n/a,n/a,n/a,n/a,n/a\n";
    }
    out << "correlation,r,p\n";
    out << "pearson," << format_double(report.pearson_r) << ','
        << format_double(report.pearson_p) << '\n';
    out << "spearman," << format_double(report.spearman_rho) << ','
        << format_double(report.spearman_p) << '\n';
}

void write_eval_bundle(const ArmMetrics& metrics, const fs::path& dir) {
    fs::create_directories(dir);
    write_agreement_csv(metrics.agreement, dir / "agreement.csv");
    write_classification_csv(metrics.classification, dir / "classification.csv");
    write_confusion_csv(metrics.classification, dir / "confusion.csv");
    write_bland_altman_points_csv(metrics.ref_ahi, metrics.pred_ahi,
                                  dir / "bland_altman_points.csv");
    write_parity_points_csv(metrics.ref_ahi, metrics.pred_ahi, dir / "parity_points.csv");
}

void write_run_manifest(const fs::path& dir, const std::string& config_json,
                        std::uint64_t seed) {
    fs::create_directories(dir);
    std::uint64_t hash = 1469598103934665603ull;  // FNV-1a 64
    for (unsigned char c : config_json) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    json j;
    j["config_hash"] = std::string(buf);
    j["seed"] = seed;
    j["tool_version"] = kToolVersion;
    std::ofstream out(dir / "run_manifest.json");
    if (!out) throw std::runtime_error("cannot write run_manifest.json");
    out << j.dump(1) << '\n';
}

}  // namespace kindsleep
