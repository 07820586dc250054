#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "charlab/masking.hpp"
#include "charlab/model.hpp"
#include "charlab/optim.hpp"

namespace charlab {

enum class ModelKind { char_model, token_baseline };

// Everything one experiment run needs, parsed from a flat "key = value" text
// file plus command-line overrides. Invalid objective cells are rejected here,
// at parse time.
struct RunConfig {
    ModelKind model = ModelKind::char_model;
    model::ArchConfig arch = model::ArchConfig::toy();

    objectives::MaskingScheme masking = objectives::MaskingScheme::tokeniser;
    objectives::PredictionTarget target = objectives::PredictionTarget::token;
    double mask_rate = 0.15;
    objectives::TokenLossPosition token_loss_position = objectives::TokenLossPosition::first;
    double corrupt_mask_prob = 0.8;
    double corrupt_random_prob = 0.1;

    optim::SchedulePreset schedule{1.25e-3, 1.25e-5, 50, 500};
    optim::LambHyper lamb;
    double clip_norm = 10.0;
    double ema_decay = 0.9;
    int64_t ema_every = 100;
    int64_t batch_size = 4;
    int64_t eval_interval = 100;

    uint64_t seed = 42;
    bool deterministic = true;
    int precision = 32;  // 32 or 64

    std::string corpus;
    double eval_fraction = 0.1;
    std::string tokeniser;
    std::string output_dir = "run";
    std::string eval_task = "none";  // none | tagging | span
    std::string eval_task_path;
    std::string selection_metric = "eval_loss";  // eval_loss | task_f1

    // canonical echo: every key, sorted, one per line
    std::string echo() const;

    // the fields that must match for a checkpoint to load into this config
    std::map<std::string, std::string> arch_identity() const;

    void validate() const;
};

// Parse a config file and/or "key=value" override strings (applied in order
// after the file). Unknown keys are rejected naming the nearest valid key.
RunConfig parse_config(const std::string& path, const std::vector<std::string>& overrides);
RunConfig parse_config_text(const std::string& text, const std::vector<std::string>& overrides);

uint64_t config_hash(const std::map<std::string, std::string>& identity);

}  // namespace charlab
