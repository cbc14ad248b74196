// egiinet - view-guided point cloud completion at desk scale
// SPDX-License-Identifier: Apache-2.0

#include "egiinet/checkpoint.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace egiinet {

namespace {
constexpr const char* kMagic = "egiinet-checkpoint 1";
}

void save_checkpoint(const std::string& dir, const EgiinetModel& model, const RunConfig& cfg,
                     int64_t step, const std::string& rng_state) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("save_checkpoint: cannot create " + dir);

  const ParamStore& store = model.params();

  std::ofstream blob(dir + "/params.bin", std::ios::binary);
  if (!blob) throw std::runtime_error("save_checkpoint: cannot open params.bin in " + dir);
  int64_t offset = 0;
  std::ostringstream table;
  for (const ParamStore::Entry& e : store.entries) {
    blob.write(reinterpret_cast<const char*>(e.value.data()),
               static_cast<std::streamsize>(e.value.size() * sizeof(double)));
    table << e.name << " " << e.value.rows() << " " << e.value.cols() << " " << offset << "\n";
    offset += e.value.size() * static_cast<int64_t>(sizeof(double));
  }
  if (!blob) throw std::runtime_error("save_checkpoint: params.bin write failed in " + dir);
  blob.close();

  std::ofstream mf(dir + "/manifest.txt");
  if (!mf) throw std::runtime_error("save_checkpoint: cannot open manifest.txt in " + dir);
  mf << kMagic << "\n";
  mf << "step " << step << "\n";
  mf << "rng " << rng_state << "\n";
  mf << "[config]\n";
  write_run_config(cfg, mf);
  mf << "[params]\n";
  mf << table.str();
  if (!mf) throw std::runtime_error("save_checkpoint: manifest write failed in " + dir);
}

LoadedCheckpoint load_checkpoint(const std::string& dir) {
  std::ifstream mf(dir + "/manifest.txt");
  if (!mf) throw std::runtime_error("load_checkpoint: cannot open manifest.txt in " + dir);

  std::string line;
  if (!std::getline(mf, line) || line != kMagic) {
    throw std::runtime_error("load_checkpoint: not a checkpoint manifest: " + dir);
  }

  LoadedCheckpoint out;
  if (!std::getline(mf, line) || line.rfind("step ", 0) != 0) {
    throw std::runtime_error("load_checkpoint: missing step line in " + dir);
  }
  out.step = std::stoll(line.substr(5));
  if (!std::getline(mf, line) || line.rfind("rng ", 0) != 0) {
    throw std::runtime_error("load_checkpoint: missing rng line in " + dir);
  }
  out.rng_state = line.substr(4);

  if (!std::getline(mf, line) || line != "[config]") {
    throw std::runtime_error("load_checkpoint: missing config section in " + dir);
  }
  std::ostringstream config_text;
  while (std::getline(mf, line) && line != "[params]") config_text << line << "\n";
  std::istringstream config_in(config_text.str());
  out.config = parse_run_config(config_in);

  struct TableRow {
    std::string name;
    long rows, cols;
    int64_t offset;
  };
  std::vector<TableRow> table;
  while (std::getline(mf, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    TableRow r;
    if (!(ls >> r.name >> r.rows >> r.cols >> r.offset)) {
      throw std::runtime_error("load_checkpoint: malformed parameter table in " + dir);
    }
    table.push_back(std::move(r));
  }

  out.model = std::make_unique<EgiinetModel>(out.config.model);
  ParamStore& store = out.model->params();
  if (table.size() != store.entries.size()) {
    throw std::runtime_error("load_checkpoint: parameter table does not match model in " + dir);
  }

  std::ifstream blob(dir + "/params.bin", std::ios::binary);
  if (!blob) throw std::runtime_error("load_checkpoint: cannot open params.bin in " + dir);
  for (size_t i = 0; i < table.size(); ++i) {
    ParamStore::Entry& e = store.entries[i];
    const TableRow& r = table[i];
    if (r.name != e.name || r.rows != e.value.rows() || r.cols != e.value.cols()) {
      throw std::runtime_error("load_checkpoint: parameter mismatch for " + r.name + " in " + dir);
    }
    blob.seekg(r.offset);
    blob.read(reinterpret_cast<char*>(e.value.data()),
              static_cast<std::streamsize>(e.value.size() * sizeof(double)));
    if (!blob) throw std::runtime_error("load_checkpoint: short read for " + r.name + " in " + dir);
  }
  return out;
}

}  // namespace egiinet
