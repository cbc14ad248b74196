// egiinet - view-guided point cloud completion at desk scale
// SPDX-License-Identifier: Apache-2.0

#include "egiinet/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace egiinet {

void RunConfig::validate() const {
  model.validate();
  if (!(lr > 0.0)) throw std::invalid_argument("config: lr must be positive");
  if (epochs < 1 || batch_size < 1) throw std::invalid_argument("config: counts must be >= 1");
  if (train_samples < 1 || val_samples < 1) {
    throw std::invalid_argument("config: sample counts must be >= 1");
  }
  if (n_complete < model.pc_input) {
    throw std::invalid_argument("config: n_complete must be >= pc_input");
  }
  if (threads < 0) throw std::invalid_argument("config: threads must be >= 0");
}

namespace {

std::string trim(const std::string& s) {
  const size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

int to_int(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    const int x = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return x;
  } catch (...) {
    throw std::invalid_argument("config: bad integer for " + key + ": " + v);
  }
}

double to_double(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return x;
  } catch (...) {
    throw std::invalid_argument("config: bad number for " + key + ": " + v);
  }
}

uint64_t to_u64(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    const unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return static_cast<uint64_t>(x);
  } catch (...) {
    throw std::invalid_argument("config: bad seed for " + key + ": " + v);
  }
}

bool apply_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  ModelConfig& m = cfg.model;
  if (key == "variant") m.variant = variant_from_string(value);
  else if (key == "n_tokens") m.n_tokens = to_int(value, key);
  else if (key == "channels") m.channels = to_int(value, key);
  else if (key == "sfe_blocks") m.sfe_blocks = to_int(value, key);
  else if (key == "sft_blocks") m.sft_blocks = to_int(value, key);
  else if (key == "dec_blocks") m.dec_blocks = to_int(value, key);
  else if (key == "heads") m.heads = to_int(value, key);
  else if (key == "patch") m.patch = to_int(value, key);
  else if (key == "image_h") m.image_h = to_int(value, key);
  else if (key == "image_w") m.image_w = to_int(value, key);
  else if (key == "n_out") m.n_out = to_int(value, key);
  else if (key == "pc_input") m.pc_input = to_int(value, key);
  else if (key == "stage1_centers") m.stage1_centers = to_int(value, key);
  else if (key == "stage1_channels") m.stage1_channels = to_int(value, key);
  else if (key == "pos_hidden") m.pos_hidden = to_int(value, key);
  else if (key == "head_hidden") m.head_hidden = to_int(value, key);
  else if (key == "radius1") m.radius1 = to_double(value, key);
  else if (key == "radius2") m.radius2 = to_double(value, key);
  else if (key == "max_k") m.max_k = to_int(value, key);
  else if (key == "alpha") m.alpha = to_double(value, key);
  else if (key == "lr") cfg.lr = to_double(value, key);
  else if (key == "epochs") cfg.epochs = to_int(value, key);
  else if (key == "batch_size") cfg.batch_size = to_int(value, key);
  else if (key == "seed") cfg.seed = to_u64(value, key);
  else if (key == "threads") cfg.threads = to_int(value, key);
  else if (key == "train_samples") cfg.train_samples = to_int(value, key);
  else if (key == "val_samples") cfg.val_samples = to_int(value, key);
  else if (key == "n_complete") cfg.n_complete = to_int(value, key);
  else if (key == "families") {
    cfg.families.clear();
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) cfg.families.push_back(family_from_string(trim(item)));
    }
  } else if (key == "data_manifest") cfg.data_manifest = value;
  else if (key == "out_dir") cfg.out_dir = value;
  else return false;
  return true;
}

}  // namespace

RunConfig parse_run_config(std::istream& in) {
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config: expected key = value on line " + std::to_string(lineno));
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!apply_key(cfg, key, value)) {
      throw std::invalid_argument("config: unknown key '" + key + "' on line " +
                                  std::to_string(lineno));
    }
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  return parse_run_config(in);
}

void write_run_config(const RunConfig& cfg, std::ostream& out) {
  char buf[128];
  auto put_int = [&](const char* key, long long v) { out << key << " = " << v << "\n"; };
  auto put_u64 = [&](const char* key, uint64_t v) {
    out << key << " = " << static_cast<unsigned long long>(v) << "\n";
  };
  auto put_real = [&](const char* key, double v) {
    std::snprintf(buf, sizeof(buf), "%s = %.17g\n", key, v);
    out << buf;
  };

  out << "variant = " << to_string(cfg.model.variant) << "\n";
  put_int("n_tokens", cfg.model.n_tokens);
  put_int("channels", cfg.model.channels);
  put_int("sfe_blocks", cfg.model.sfe_blocks);
  put_int("sft_blocks", cfg.model.sft_blocks);
  put_int("dec_blocks", cfg.model.dec_blocks);
  put_int("heads", cfg.model.heads);
  put_int("patch", cfg.model.patch);
  put_int("image_h", cfg.model.image_h);
  put_int("image_w", cfg.model.image_w);
  put_int("n_out", cfg.model.n_out);
  put_int("pc_input", cfg.model.pc_input);
  put_int("stage1_centers", cfg.model.stage1_centers);
  put_int("stage1_channels", cfg.model.stage1_channels);
  put_int("pos_hidden", cfg.model.pos_hidden);
  put_int("head_hidden", cfg.model.head_hidden);
  put_real("radius1", cfg.model.radius1);
  put_real("radius2", cfg.model.radius2);
  put_int("max_k", cfg.model.max_k);
  put_real("alpha", cfg.model.alpha);
  put_real("lr", cfg.lr);
  put_int("epochs", cfg.epochs);
  put_int("batch_size", cfg.batch_size);
  put_u64("seed", cfg.seed);
  put_int("threads", cfg.threads);
  put_int("train_samples", cfg.train_samples);
  put_int("val_samples", cfg.val_samples);
  put_int("n_complete", cfg.n_complete);
  if (!cfg.families.empty()) {
    out << "families = ";
    for (size_t i = 0; i < cfg.families.size(); ++i) {
      out << (i ? "," : "") << to_string(cfg.families[i]);
    }
    out << "\n";
  }
  if (!cfg.data_manifest.empty()) out << "data_manifest = " << cfg.data_manifest << "\n";
  if (!cfg.out_dir.empty()) out << "out_dir = " << cfg.out_dir << "\n";
}

void apply_env_seed_override(RunConfig& cfg) {
  const char* env = std::getenv("EGIINET_SEED");
  if (env == nullptr || env[0] == '\0') return;
  cfg.seed = to_u64(env, "EGIINET_SEED");
}

DatasetConfig dataset_config_from(const RunConfig& cfg, int n_samples) {
  DatasetConfig d;
  d.n_samples = n_samples;
  d.n_complete = cfg.n_complete;
  d.partial_size = cfg.model.pc_input;
  d.image_h = cfg.model.image_h;
  d.image_w = cfg.model.image_w;
  d.seed = cfg.seed;
  d.families = cfg.families;
  return d;
}

}  // namespace egiinet
