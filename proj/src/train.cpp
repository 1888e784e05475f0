#include "swinlstm/train.hpp"

#include <sstream>

namespace swinlstm {

void TrainConfig::validate() const {
  std::vector<std::string> issues;
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    issues.push_back("learning_rate must be positive, got " + std::to_string(learning_rate));
  if (batch_size < 1)
    issues.push_back("batch_size must be at least 1, got " + std::to_string(batch_size));
  if (frames_per_phase < 2)
    issues.push_back("frames_per_phase must be at least 2, got " +
                     std::to_string(frames_per_phase));
  if (epochs < 0) issues.push_back("epochs must not be negative, got " + std::to_string(epochs));
  if (checkpoint_interval < 0)
    issues.push_back("checkpoint_interval must not be negative, got " +
                     std::to_string(checkpoint_interval));
  if (!issues.empty()) throw ConfigError(issues);
}

std::string TrainConfig::to_text() const {
  std::ostringstream out;
  out.precision(17);
  out << "learning_rate = " << learning_rate << "\n"
      << "batch_size = " << batch_size << "\n"
      << "epochs = " << epochs << "\n"
      << "frames_per_phase = " << frames_per_phase << "\n"
      << "loss = " << to_string(loss) << "\n"
      << "seed = " << seed << "\n"
      << "checkpoint_interval = " << checkpoint_interval << "\n";
  return out.str();
}

TrainConfig TrainConfig::from_text(const std::string& text) {
  KvReader r(text);
  TrainConfig cfg = read(r);
  r.finish();
  cfg.validate();
  return cfg;
}

TrainConfig TrainConfig::read(KvReader& r) {
  TrainConfig cfg;
  cfg.learning_rate = r.get_double("learning_rate", cfg.learning_rate);
  cfg.batch_size = r.get_int("batch_size", cfg.batch_size);
  cfg.epochs = r.get_int("epochs", cfg.epochs);
  cfg.frames_per_phase = r.get_int("frames_per_phase", cfg.frames_per_phase);
  cfg.loss = r.get_choice("loss", "L2", {"L2", "L1+L2"}) == "L2" ? LossMode::l2 : LossMode::l1_l2;
  cfg.seed = static_cast<std::uint64_t>(r.get_int("seed", static_cast<std::int64_t>(cfg.seed)));
  cfg.checkpoint_interval = r.get_int("checkpoint_interval", cfg.checkpoint_interval);
  return cfg;
}

}  // namespace swinlstm
