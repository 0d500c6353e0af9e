#include "holmes/store.hpp"

#include <openssl/evp.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <regex>
#include <sstream>

#include "holmes/binary_io.hpp"
#include "holmes/errors.hpp"

namespace holmes::store {

namespace {

constexpr const char* kConfig = "config.json";
constexpr const char* kRecords = "history/records.jsonl";
constexpr const char* kEvents = "events.jsonl";

fs::path engine_file(const fs::path& dir, int stage) {
  return dir / "checkpoints" / ("engine_" + std::to_string(stage) + ".json");
}
fs::path tree_file(const fs::path& dir, int stage) {
  return dir / "checkpoints" / ("tree_" + std::to_string(stage) + ".bin");
}
fs::path reembed_file(const fs::path& dir, int stage) {
  return dir / "history" / ("reembed_" + std::to_string(stage) + ".jsonl");
}

void write_atomically(const fs::path& file, const std::string& content) {
  const fs::path tmp = file.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    os << content;
    os.flush();
    if (!os) throw IntegrityError("failed writing " + file.string());
  }
  fs::rename(tmp, file);
}

std::string read_file(const fs::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw IntegrityError("cannot read " + file.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// Complete, parseable lines; a torn final line is dropped.
std::vector<serial::Json> read_jsonl(const fs::path& file, std::vector<std::uintmax_t>* line_ends = nullptr) {
  std::vector<serial::Json> out;
  if (!fs::exists(file)) return out;
  const std::string text = read_file(file);
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) break;
    try {
      out.push_back(serial::Json::parse(text.substr(pos, nl - pos)));
    } catch (const serial::Json::parse_error&) {
      break;
    }
    pos = nl + 1;
    if (line_ends) line_ends->push_back(pos);
  }
  return out;
}

// Stages with a complete engine marker, ascending.
std::vector<int> committed_stages(const fs::path& dir) {
  std::vector<int> out;
  const fs::path cp = dir / "checkpoints";
  if (!fs::exists(cp)) return out;
  static const std::regex pattern(R"(engine_(\d+)\.json)");
  for (const auto& e : fs::directory_iterator(cp)) {
    std::smatch m;
    const std::string name = e.path().filename().string();
    if (std::regex_match(name, m, pattern)) out.push_back(std::stoi(m[1].str()));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::string pattern_name(std::size_t run_index) { return pattern_ref_for(run_index); }

void write_pattern(const Grid& g, const fs::path& file) {
  std::vector<float> values(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) values[i] = static_cast<float>(g.data()[i]);
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  io::write_f32s(os, values);
  os.flush();
  if (!os) throw IntegrityError("failed writing pattern " + file.string());
}

Grid read_pattern(const fs::path& file, GridShape shape) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw IntegrityError("missing pattern blob " + file.string());
  if (fs::file_size(file) != 4 * shape.cells())
    throw IntegrityError("pattern blob " + file.string() + " has the wrong size");
  std::vector<float> values(shape.cells());
  io::read_f32s(is, values);
  return Grid(shape, std::vector<double>(values.begin(), values.end()));
}

namespace {

png_image gray_image(const Grid& g) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(g.width());
  img.height = static_cast<png_uint_32>(g.height());
  img.format = PNG_FORMAT_GRAY;
  return img;
}

std::vector<std::uint8_t> to_bytes(const Grid& g) {
  std::vector<std::uint8_t> px(g.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    px[i] = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(g.data()[i], 0.0, 1.0)));
  return px;
}

}  // namespace

void write_png(const Grid& g, const fs::path& file) {
  png_image img = gray_image(g);
  const auto px = to_bytes(g);
  if (!png_image_write_to_file(&img, file.c_str(), 0, px.data(), 0, nullptr))
    throw IntegrityError("PNG write failed: " + std::string(img.message));
}

std::vector<std::uint8_t> encode_png(const Grid& g) {
  png_image img = gray_image(g);
  const auto px = to_bytes(g);
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, px.data(), 0, nullptr))
    throw IntegrityError("PNG encode failed: " + std::string(img.message));
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, px.data(), 0, nullptr))
    throw IntegrityError("PNG encode failed: " + std::string(img.message));
  out.resize(size);
  return out;
}

Grid read_png(const fs::path& file) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, file.c_str())) throw IntegrityError("PNG read failed: " + file.string());
  img.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> px(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, px.data(), 0, nullptr))
    throw IntegrityError("PNG decode failed: " + std::string(img.message));
  Grid g({static_cast<int>(img.height), static_cast<int>(img.width)});
  for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] = px[i] / 255.0;
  return g;
}

std::string history_digest(const History& history) {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<float> values;
  for (const Record& r : history.records()) {
    const std::string line = serial::to_json(r).dump();
    EVP_DigestUpdate(ctx, line.data(), line.size());
    if (r.pattern) {
      values.assign(r.pattern->data().begin(), r.pattern->data().end());
      std::ostringstream os;
      io::write_f32s(os, values);
      const std::string bytes = os.str();
      EVP_DigestUpdate(ctx, bytes.data(), bytes.size());
    }
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

RunStore::RunStore(fs::path dir) : dir_(std::move(dir)) {}
RunStore::RunStore(RunStore&&) noexcept = default;
RunStore& RunStore::operator=(RunStore&&) noexcept = default;
RunStore::~RunStore() = default;

void RunStore::open_streams() {
  records_.open(dir_ / kRecords, std::ios::binary | std::ios::app);
  events_.open(dir_ / kEvents, std::ios::binary | std::ios::app);
  if (!records_ || !events_) throw IntegrityError("cannot open run files in " + dir_.string());
}

RunStore RunStore::create(const fs::path& dir, const ExplorationConfig& config) {
  if (fs::exists(dir / kRecords) && fs::file_size(dir / kRecords) > 0)
    throw ConfigError("run directory " + dir.string() + " already holds records");
  for (const char* sub : {"history", "patterns", "checkpoints", "eval"}) fs::create_directories(dir / sub);
  write_atomically(dir / kConfig, serial::to_json(config).dump(2) + "\n");
  std::ofstream(dir / kRecords, std::ios::trunc);
  std::ofstream(dir / kEvents, std::ios::trunc);
  RunStore s(dir);
  s.open_streams();
  return s;
}

RunStore RunStore::reopen(const fs::path& dir, std::size_t committed_runs, int committed_stage) {
  std::vector<std::uintmax_t> ends;
  const auto lines = read_jsonl(dir / kRecords, &ends);
  if (lines.size() < committed_runs) throw IntegrityError("history shorter than the committed stage");
  fs::resize_file(dir / kRecords, committed_runs == 0 ? 0 : ends[committed_runs - 1]);
  for (const auto& e : fs::directory_iterator(dir / "patterns")) {
    const std::string stem = e.path().stem().string();
    if (!stem.empty() && std::all_of(stem.begin(), stem.end(), ::isdigit) && std::stoull(stem) >= committed_runs)
      fs::remove(e.path());
  }
  static const std::regex staged(R"((engine|tree|reembed|module_.*)_(\d+)\.(json|bin|jsonl|tmp))");
  for (const fs::path& sub : {dir / "checkpoints", dir / "history"})
    for (const auto& e : fs::directory_iterator(sub)) {
      std::smatch m;
      const std::string name = e.path().filename().string();
      if (std::regex_match(name, m, staged) && std::stoi(m[2].str()) > committed_stage) fs::remove(e.path());
    }
  RunStore s(dir);
  if (committed_stage > 0 && fs::exists(tree_file(dir, committed_stage))) {
    // Frozen modules keep pointing at the blob written when they froze.
    const HolmesTree tree = load_tree(dir, committed_stage);
    const auto engine = serial::Json::parse(read_file(engine_file(dir, committed_stage)));
    for (const auto& [id, ref] : engine.at("modules").items())
      if (tree.node(id).module->frozen()) s.frozen_refs_[id] = ref.get<std::string>();
  }
  s.open_streams();
  return s;
}

void RunStore::append_record(const Record& r) {
  write_pattern(*r.pattern, dir_ / r.pattern_ref);
  records_ << serial::to_json(r).dump() << '\n';
  if (!records_) throw IntegrityError("failed appending record " + std::to_string(r.run_index));
}

void RunStore::append_event(const serial::Json& event) {
  events_ << event.dump() << '\n';
}

void RunStore::flush() {
  records_.flush();
  events_.flush();
  if (!records_ || !events_) throw IntegrityError("failed flushing run files");
}

void RunStore::commit_stage(const Explorer& explorer, const StageReport& report) {
  flush();
  const int stage = report.stage;
  if (!report.reembedded.empty()) {
    std::string lines;
    for (const auto& e : report.reembedded)
      lines += serial::Json{{"run", e.run_index}, {"node", e.node}, {"emb", e.embedding}}.dump() + "\n";
    write_atomically(reembed_file(dir_, stage), lines);
  }
  serial::Json modules = serial::Json::object();
  if (const HolmesTree* tree = explorer.tree()) {
    std::map<std::string, std::string> refs;
    for (const auto& id : tree->node_ids()) {
      const TreeNode& n = tree->node(id);
      const auto frozen = frozen_refs_.find(id);
      if (n.module->frozen() && frozen != frozen_refs_.end()) {
        refs[id] = frozen->second;
      } else {
        const std::string ref = "module_" + id + "_" + std::to_string(stage) + ".bin";
        std::ostringstream os;
        save_module(*n.module, os);
        write_atomically(dir_ / "checkpoints" / ref, os.str());
        refs[id] = ref;
        if (n.module->frozen()) frozen_refs_[id] = ref;
      }
      modules[id] = refs[id];
    }
    std::ostringstream table;
    write_tree(*tree, table, refs);
    write_atomically(tree_file(dir_, stage), table.str());
  }
  const serial::Json marker = {{"stage", stage},
                               {"runs_done", explorer.history().size()},
                               {"rng", explorer.rng_state()},
                               {"scores", explorer.scores()},
                               {"modules", modules},
                               {"digest", history_digest(explorer.history())}};
  write_atomically(engine_file(dir_, stage), marker.dump(2) + "\n");
}

void StoreSink::on_record(const Record& record) {
  store_.append_record(record);
  store_.append_event({{"type", "run_completed"}, {"run", record.run_index}, {"leaf", record.leaf()}});
}

void StoreSink::on_stage_trained(const StageReport& report) {
  store_.append_event({{"type", "stage_trained"}, {"stage", report.stage}, {"runs_done", report.runs_done},
                       {"trained", report.trained}});
}

void StoreSink::on_split(const StageReport& report) {
  store_.append_event({{"type", "split_occurred"}, {"stage", report.stage}, {"parent", report.split_node},
                       {"children", {report.split->left, report.split->right}}});
}

void StoreSink::on_feedback_requested(const FeedbackRequest& request) {
  store_.append_event(
      {{"type", "feedback_requested"}, {"stage", request.stage}, {"leaves", request.leaves}, {"scores", request.current}});
}

void StoreSink::on_stage_end(const Explorer& explorer, const StageReport& report) {
  store_.commit_stage(explorer, report);
}

HolmesTree load_tree(const fs::path& dir, int stage) {
  std::ifstream is(tree_file(dir, stage), std::ios::binary);
  if (!is) throw IntegrityError("no tree checkpoint for stage " + std::to_string(stage));
  return read_tree(is, [&](const std::string& ref) {
    std::ifstream ms(dir / "checkpoints" / ref, std::ios::binary);
    if (!ms) throw IntegrityError("missing module blob " + ref + " referenced by stage " + std::to_string(stage));
    return load_module(ms);
  });
}

LoadedRun load_run(const fs::path& dir) {
  if (!fs::exists(dir / kConfig)) throw NoRunError("no run found in " + dir.string());
  LoadedRun out;
  out.config = serial::config_from_json(serial::Json::parse(read_file(dir / kConfig)));
  const auto lines = read_jsonl(dir / kRecords);
  const auto stages = committed_stages(dir);
  const int stage = stages.empty() ? 0 : stages.back();
  for (int s : stages)
    if (fs::exists(tree_file(dir, s))) out.tree_checkpoints[s] = tree_file(dir, s);

  std::size_t runs_done = 0;
  serial::Json marker;
  if (stage > 0) {
    marker = serial::Json::parse(read_file(engine_file(dir, stage)));
    runs_done = marker.at("runs_done").get<std::size_t>();
    if (lines.size() < runs_done)
      throw IntegrityError("stage " + std::to_string(stage) + " expects " + std::to_string(runs_done) +
                           " records but the history holds " + std::to_string(lines.size()));
  }
  const GridShape shape = out.config.shape();
  auto load_record = [&](const serial::Json& j, std::size_t expect) {
    Record r = serial::record_from_json(j);
    if (r.run_index != expect) throw IntegrityError("history line " + std::to_string(expect) + " is out of order");
    r.pattern = std::make_shared<const Grid>(read_pattern(dir / r.pattern_ref, shape));
    return r;
  };
  for (std::size_t i = 0; i < runs_done; ++i) out.state.history.append(load_record(lines[i], i));
  for (int s = 1; s <= stage; ++s)
    for (const auto& j : read_jsonl(reembed_file(dir, s))) {
      const auto idx = j.at("run").get<std::size_t>();
      const auto node = j.at("node").get<std::string>();
      auto emb = j.at("emb").get<std::vector<double>>();
      if (idx >= out.state.history.size())
        throw IntegrityError("stage " + std::to_string(s) + " re-embeds unknown run " + std::to_string(idx));
      if (out.state.history[idx].emb.contains(node))
        out.state.history.set_embedding(idx, node, std::move(emb));
      else
        out.state.history.extend_path(idx, node, std::move(emb));
    }
  for (std::size_t i = runs_done; i < lines.size(); ++i) {
    try {
      out.tail.push_back(load_record(lines[i], i));
    } catch (const IntegrityError&) {
      break;  // pattern written but line torn, or the reverse
    }
  }
  out.uncommitted = out.tail.size();

  out.state.stage = stage;
  if (stage > 0) {
    if (history_digest(out.state.history) != marker.at("digest").get<std::string>())
      throw IntegrityError("history diverges from the checkpoint of stage " + std::to_string(stage));
    out.state.rng_state = marker.at("rng").get<std::string>();
    out.state.scores = marker.at("scores").get<InterestScores>();
    if (out.config.goal_space == GoalSpaceKind::holmes)
      out.state.tree = std::make_unique<HolmesTree>(load_tree(dir, stage));
  }
  return out;
}

void export_png(const fs::path& dir, std::size_t run_index, const fs::path& out) {
  if (!fs::exists(dir / kConfig)) throw NoRunError("no run found in " + dir.string());
  const auto cfg = serial::config_from_json(serial::Json::parse(read_file(dir / kConfig)));
  const fs::path blob = dir / pattern_ref_for(run_index);
  if (!fs::exists(blob)) throw ConfigError("no pattern for run " + std::to_string(run_index));
  write_png(read_pattern(blob, cfg.shape()), out);
}

}  // namespace holmes::store
