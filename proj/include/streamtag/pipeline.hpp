#ifndef STREAMTAG_PIPELINE_HPP_
#define STREAMTAG_PIPELINE_HPP_

#include <cstdint>
#include <memory>
#include <span>
#include <string>

#include "streamtag/noise.hpp"
#include "streamtag/synth.hpp"
#include "streamtag/trainer.hpp"

namespace streamtag {

/// Tag set from every event type in `batches`, POS vocabulary from their tokens.
ModelContext make_model_context(std::span<const Batch> batches,
                                std::shared_ptr<const WordEmbeddingTable> words);

/// synth -> simulate -> pretrain extractor -> train every strategy, all seeded
/// from `master_seed`.
struct PipelineConfig {
  SynthConfig synth = SynthConfig::standard();
  StructuredEmbeddingOptions embeddings;
  NoiseSchedule schedule = schedule_25();
  int n_groups = 5;
  std::size_t guidelines_per_type = 45;
  PretrainConfig pretrain;
  ExperimentConfig experiment;
  std::uint64_t master_seed = 2024;
};

struct PipelineResult {
  std::vector<Batch> clean;
  std::vector<SimulationGroup> groups;
  PretrainResult pretrain;
  num::ParameterContainer projection_before;
  ExperimentResult experiment;
};

PipelineResult run_pipeline(const PipelineConfig& config, DataAccessLog* log = nullptr);

}  // namespace streamtag

#endif  // STREAMTAG_PIPELINE_HPP_
