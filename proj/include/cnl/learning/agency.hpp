#pragma once

#include "cnl/learning/global_model.hpp"
#include "cnl/learning/problems.hpp"

namespace cnl::learning {

struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Graph operators for one problem: the encoder always runs on the local
/// graph; the head runs on it too, or on the integrated graph with one
/// virtual row per slot.
struct ForwardSetup {
  nn::GraphContext encoder;
  nn::GraphContext head;
  std::optional<Matrix> virtual_rows;

  static ForwardSetup local(const Problem& p);
  static ForwardSetup integrated(const Problem& p, Matrix virtual_rows, double weight);
};

struct FitResult {
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  double lr = 0.0;
  std::vector<double> train_curve;
  std::vector<double> val_curve;
};

Matrix forward_sample(nn::GraphModel& model, const ForwardSetup& setup, const Sample& s);
double split_loss(nn::GraphModel& model, const Problem& p, const ForwardSetup& setup, Split split);
/// Adam/SGD over the training samples, one step per sample in a seeded
/// shuffled order, keeping the parameters with the lowest validation loss.
/// Throws TrainingError on a non-finite loss.
FitResult fit(nn::GraphModel& model, const Problem& p, const ForwardSetup& setup, const TrainConfig& cfg,
              std::uint64_t seed);
/// One output matrix per sample of the split.
std::vector<Matrix> predict(nn::GraphModel& model, const Problem& p, const ForwardSetup& setup, Split split);
/// Mean of the local embeddings ξ over all nodes, one row per slot.
Matrix pool_agency(nn::GraphModel& model, const Problem& p, const ForwardSetup& setup);

struct ModelRun {
  nn::GraphModel model;
  FitResult fit;
  std::vector<Matrix> val_pred;
  std::vector<Matrix> test_pred;
};

/// Trains from `init` (or a fresh model seeded with `seed`) and predicts val
/// and test. With a non-empty lr grid every rate is tried and the lowest
/// validation loss wins.
ModelRun train_model(const Problem& p, const ForwardSetup& setup, const TrainConfig& cfg,
                     const std::vector<double>& lr_grid, std::uint64_t seed,
                     const nn::GraphModel* init = nullptr);

ModelRun train_local(const Problem& p, const LearningHyper& h, std::uint64_t seed);
/// Same initialization and budget as train_local with the same seed; the
/// virtual node carrying Ξ is the only difference.
ModelRun train_integrated(const Problem& p, const LearningHyper& h, const Matrix& xi, std::uint64_t seed);
ModelRun train_centralized(const Problem& full, const LearningHyper& h, std::uint64_t seed);

struct AgencyRun {
  std::optional<ModelRun> local;
  std::optional<ModelRun> integrated;
  Matrix xi_local;
  Matrix xi_final;
  std::vector<RoundRecord> rounds;
  bool partial = false;
};

/// Local training, then (when `exchange` is given) pooling, task_iter global
/// rounds and integrated training. Every agency of a task must call this
/// with its own exchange function so rounds line up. Fills `out` as it goes,
/// so a throw after local training still leaves the local model there.
void run_agency(AgencyRun& out, const Problem& p, const LearningHyper& h, std::uint64_t seed,
                const ExchangeFn* exchange);

/// splitmix64 of (seed, tag, index); used to give every agency and model its
/// own stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t index = 0);

}  // namespace cnl::learning
