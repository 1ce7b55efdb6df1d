#include "streamtag/tagger.hpp"

#include <map>

#include "streamtag/crf.hpp"
#include "streamtag/ops.hpp"

namespace streamtag {
namespace {

TokenEncoder make_encoder(const ModelContext& c, std::mt19937_64& rng) {
  return TokenEncoder(c.words, c.pos_vocab, c.dims, c.train_word_vectors, rng);
}

}  // namespace

PreCrfLayer::PreCrfLayer(std::size_t input_dim, std::size_t num_tags, std::mt19937_64& rng)
    : w1_("precrf.w1", num::glorot_uniform(input_dim, kPreCrfHidden, rng)),
      b1_("precrf.b1", num::Tensor({kPreCrfHidden})),
      w2_("precrf.w2", num::glorot_uniform(kPreCrfHidden, num_tags, rng)),
      b2_("precrf.b2", num::Tensor({num_tags})) {}

num::Var PreCrfLayer::apply(num::Graph& g, num::Var x) const {
  num::Var h = num::tanh(num::add_bias(num::matmul(x, g.parameter(w1_)), g.parameter(b1_)));
  return num::add_bias(num::matmul(h, g.parameter(w2_)), g.parameter(b2_));
}

void PreCrfLayer::collect(std::vector<num::Parameter*>& out) {
  for (num::Parameter* p : {&w1_, &b1_, &w2_, &b2_}) out.push_back(p);
}

StreamModel::StreamModel(ModelContext context, std::uint64_t seed)
    : context_(std::make_shared<const ModelContext>(std::move(context))),
      encoder_([&] {
        std::mt19937_64 rng(seed);
        return make_encoder(*context_, rng);
      }()) {
  if (context_->tagset.size() == 0) throw std::invalid_argument("model needs a non-empty tag set");
  // Separate stream so the encoder's draws do not shift the rest.
  std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
  const std::size_t in = encoder_.output_dim();
  ctx_fwd_ = LstmWeights::create("context.fwd", in, kContextHidden, rng);
  ctx_bwd_ = LstmWeights::create("context.bwd", in, kContextHidden, rng);
  pre_crf_ = PreCrfLayer(2 * kContextHidden, num_tags(), rng);
  const std::size_t k = num_tags() + 2;
  transitions_ = num::Parameter("crf.transitions", num::Tensor({k, k}));
}

void StreamModel::enable_memory(std::uint64_t seed) {
  if (memory_) throw std::logic_error("memory is already enabled");
  std::mt19937_64 rng(seed);
  memory_.emplace(kSentenceEmbeddingDim, kMemoryHidden, rng);
  pre_crf_ = PreCrfLayer(2 * kContextHidden + kMemoryHidden, num_tags(), rng);
}

num::Var StreamModel::features(num::Graph& g, const Sentence& s) const {
  if (s.tokens.empty()) throw std::invalid_argument("cannot tag an empty sentence");
  return encoder_.encode(g, s);
}

num::Var StreamModel::context_encode(num::Graph& g, num::Var features) const {
  num::Var fwd = ctx_fwd_.run(g, features, false);
  num::Var bwd = ctx_bwd_.run(g, features, true);
  return num::concat({fwd, bwd});
}

std::optional<num::Var> StreamModel::memory(num::Graph& g, const RetrievedSequence* seq) const {
  if (!memory_ || seq == nullptr) return std::nullopt;
  return memory_embed(g, *memory_, *seq);
}

num::Var StreamModel::emissions(num::Graph& g, num::Var context,
                                std::optional<num::Var> memory) const {
  const std::size_t width = context.value().cols();
  const std::size_t n = context.value().rows();
  if (pre_crf_.input_dim() == width) {
    if (memory) throw std::invalid_argument("memory supplied to a pre-CRF layer without a memory input");
    return pre_crf_.apply(g, context);
  }
  const std::size_t mem_width = pre_crf_.input_dim() - width;
  num::Var mem = memory ? *memory : g.constant(num::Tensor({1, mem_width}));
  if (mem.value().size() != mem_width) {
    throw num::ShapeError("memory width " + std::to_string(mem.value().size()) + " != " +
                          std::to_string(mem_width));
  }
  return pre_crf_.apply(g, num::concat({context, num::repeat_rows(mem, n)}));
}

num::Var StreamModel::emissions(num::Graph& g, const Sentence& s, const RetrievedSequence* seq) const {
  return emissions(g, context_encode(g, features(g, s)), memory(g, seq));
}

num::Var StreamModel::loss(num::Graph& g, const Sentence& s, const RetrievedSequence* seq) const {
  const std::vector<int> gold = tagset().encode(s.tags);
  return crf::nll(emissions(g, s, seq), transitions(g), gold);
}

std::vector<TriggerTag> StreamModel::decode(const Sentence& s, const RetrievedSequence* seq) const {
  num::Graph g(false);
  num::Var e = emissions(g, s, seq);
  const std::vector<int> ids = crf::viterbi_decode(e.value(), transitions_.value);
  return crf::repair_bio(tagset().decode(ids));
}

std::vector<num::Parameter*> StreamModel::parameters() {
  std::vector<num::Parameter*> out;
  encoder_.collect(out);
  ctx_fwd_.collect(out);
  ctx_bwd_.collect(out);
  if (memory_) memory_->collect(out);
  pre_crf_.collect(out);
  out.push_back(&transitions_);
  return out;
}

std::vector<const num::Parameter*> StreamModel::parameters() const {
  auto mut = const_cast<StreamModel*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

num::ParameterContainer StreamModel::export_parameters() const {
  num::ParameterContainer out;
  for (const num::Parameter* p : parameters()) out.push_back({p->name, p->value});
  return out;
}

void StreamModel::import_parameters(const num::ParameterContainer& params) {
  std::map<std::string, const num::Tensor*> by_name;
  for (const auto& nt : params) {
    if (!by_name.emplace(nt.name, &nt.value).second) {
      throw std::invalid_argument("duplicate parameter '" + nt.name + "'");
    }
  }
  const bool wants_memory = by_name.count("memory.lstm.w_ih") > 0;
  if (wants_memory && !memory_) enable_memory(0);
  auto mine = parameters();
  if (mine.size() != by_name.size()) {
    throw std::invalid_argument("checkpoint has " + std::to_string(by_name.size()) +
                                " parameters, model has " + std::to_string(mine.size()));
  }
  for (num::Parameter* p : mine) {
    auto it = by_name.find(p->name);
    if (it == by_name.end()) throw std::invalid_argument("checkpoint lacks parameter '" + p->name + "'");
    if (it->second->shape() != p->value.shape()) {
      throw num::ShapeError("parameter '" + p->name + "' has shape " +
                            num::shape_string(it->second->shape()) + ", expected " +
                            num::shape_string(p->value.shape()));
    }
    p->value = *it->second;
    p->zero_grad();
  }
}

}  // namespace streamtag
