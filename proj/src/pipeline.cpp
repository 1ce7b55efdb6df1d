#include "streamtag/pipeline.hpp"

#include "streamtag/rng.hpp"

namespace streamtag {

ModelContext make_model_context(std::span<const Batch> batches,
                                std::shared_ptr<const WordEmbeddingTable> words) {
  ModelContext c;
  c.tagset = build_tagset(collect_event_types(batches));
  c.words = std::move(words);
  c.pos_vocab = pos_vocabulary(batches);
  return c;
}

PipelineResult run_pipeline(const PipelineConfig& config, DataAccessLog* log) {
  PipelineResult out;
  SynthConfig synth = config.synth;
  synth.seed = derive_seed(config.master_seed, {1});
  const SynthWorld world = build_world(synth);
  out.clean = generate_corpus(synth, world);

  out.groups = generate_groups(out.clean, config.schedule, config.n_groups,
                               derive_seed(config.master_seed, {2}));

  StructuredEmbeddingOptions emb = config.embeddings;
  emb.seed = derive_seed(config.master_seed, {3});
  auto words = std::make_shared<const WordEmbeddingTable>(structured_word_embeddings(world, emb));
  const MeanPoolProvider provider(words);

  const std::vector<Sentence> guidelines =
      generate_guidelines(synth, world, config.guidelines_per_type, derive_seed(config.master_seed, {4}));
  std::vector<const Sentence*> gptr;
  for (const Sentence& s : guidelines) gptr.push_back(&s);
  const auto labeled = label_by_tags(gptr);
  PretrainConfig pre = config.pretrain;
  pre.seed = derive_seed(config.master_seed, {5});
  out.pretrain = pretrain_projection(labeled, world.event_types, provider, pre);
  out.projection_before = out.pretrain.projection.export_parameters();

  std::vector<GroupData> groups;
  for (const SimulationGroup& g : out.groups) groups.push_back({g.group_id, g.batches});
  const ModelContext model = make_model_context(out.clean, words);
  ExperimentConfig exp = config.experiment;
  exp.train.seed = derive_seed(config.master_seed, {6});
  out.experiment = run_experiment(groups, model, &provider, &out.pretrain.projection, exp, log);
  return out;
}

}  // namespace streamtag
