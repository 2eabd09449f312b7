#include <functional>
#include <set>

#include "json.hpp"
#include "reconprobe/attention.hpp"
#include "reconprobe/error.hpp"

namespace reconprobe {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

int parse_index(const std::string& text, const std::string& where) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty() || v < 0) throw IoError(where + ": bad index '" + text + "'");
  return v;
}

// Reads a long-format CSV (layer, index, value) into layers x width.
std::vector<std::vector<double>> read_long_csv(const fs::path& path, const char* index_col, const char* value_col,
                                               int layers, int width) {
  if (!fs::exists(path)) throw MissingInputError({path.string()});
  const CsvTable table = read_csv(path);
  const std::size_t lc = table.column("layer"), ic = table.column(index_col), vc = table.column(value_col);
  std::vector<std::vector<double>> out(static_cast<std::size_t>(layers), std::vector<double>(width, 0.0));
  std::vector<std::vector<std::uint8_t>> seen(static_cast<std::size_t>(layers), std::vector<std::uint8_t>(width, 0));
  std::size_t line = 1;
  for (const auto& row : table.rows) {
    ++line;
    const std::string where = path.string() + ":" + std::to_string(line);
    if (row.size() != table.header.size()) throw IoError(where + ": wrong field count");
    const int l = parse_index(row[lc], where), i = parse_index(row[ic], where);
    if (l >= layers || i >= width) throw IoError(where + ": index out of range");
    if (seen[l][i]) throw IoError(where + ": duplicate entry (" + row[lc] + ", " + row[ic] + ")");
    seen[l][i] = 1;
    try {
      out[l][i] = parse_double(row[vc]);
    } catch (const std::exception& e) {
      throw IoError(where + ": " + e.what());
    }
  }
  for (int l = 0; l < layers; ++l)
    for (int i = 0; i < width; ++i)
      if (!seen[l][i])
        throw IoError(path.string() + ": missing entry (" + std::to_string(l) + ", " + std::to_string(i) + ")");
  return out;
}

void write_long_csv(const fs::path& path, const char* index_col, const char* value_col, int layers,
                    const std::function<std::span<const double>(int)>& row_of) {
  CsvTable t;
  t.header = {"layer", index_col, value_col};
  for (int l = 0; l < layers; ++l) {
    const auto row = row_of(l);
    for (std::size_t i = 0; i < row.size(); ++i) t.rows.push_back({std::to_string(l), std::to_string(i), format_exact(row[i])});
  }
  write_csv(t, path);
}

}  // namespace

fs::path attention_meta_path(const fs::path& dir, const std::string& record_id, const std::string& variant) {
  return dir / (record_id + "." + variant + ".meta.json");
}

AttentionStack load_attention_stack(const fs::path& meta_path) {
  if (!fs::exists(meta_path)) throw MissingInputError({meta_path.string()});
  std::string name = meta_path.filename().string();
  const std::string suffix = ".meta.json";
  const std::string stem =
      name.size() > suffix.size() && name.ends_with(suffix) ? name.substr(0, name.size() - suffix.size()) : name;
  const fs::path dir = meta_path.parent_path();
  try {
    const json meta = json::parse(read_text_file(meta_path));
    const auto record_id = meta.at("record_id").get<std::string>();
    const auto variant = meta.at("variant").get<std::string>();
    const int layers = meta.at("layers").get<int>();
    const auto grid = meta.at("grid").get<std::vector<int>>();
    const int dim = meta.at("embed_dim").get<int>();
    if (grid.size() != 2 || grid[0] <= 0 || grid[1] <= 0) throw ValidationError("grid must be [rows, cols]");
    if (layers <= 0 || dim <= 0) throw ValidationError("layers and embed_dim must be positive");
    const fs::path attn = dir / meta.value("attention_file", stem + ".attn.csv");
    const fs::path cls = dir / meta.value("embedding_file", stem + ".cls.csv");
    std::vector<std::string> missing;
    if (!fs::exists(attn)) missing.push_back(attn.string());
    if (!fs::exists(cls)) missing.push_back(cls.string());
    if (!missing.empty()) throw MissingInputError(missing);
    PatchGrid g{grid[0], grid[1]};
    return AttentionStack(record_id, variant, g, read_long_csv(attn, "patch_index", "weight", layers, g.size()),
                          read_long_csv(cls, "dim_index", "value", layers, dim));
  } catch (const json::exception& e) {
    throw IoError(meta_path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(meta_path.string() + ": " + e.what());
  }
}

fs::path save_attention_stack(const AttentionStack& stack, const fs::path& dir) {
  fs::create_directories(dir);
  const std::string stem = stack.record_id() + "." + stack.variant();
  json meta = {{"record_id", stack.record_id()},
               {"variant", stack.variant()},
               {"layers", stack.layers()},
               {"grid", {stack.grid().rows, stack.grid().cols}},
               {"embed_dim", stack.embed_dim()},
               {"attention_file", stem + ".attn.csv"},
               {"embedding_file", stem + ".cls.csv"}};
  write_long_csv(dir / (stem + ".attn.csv"), "patch_index", "weight", stack.layers(),
                 [&](int l) { return stack.attention(l); });
  write_long_csv(dir / (stem + ".cls.csv"), "dim_index", "value", stack.layers(),
                 [&](int l) { return stack.cls_embedding(l); });
  const fs::path meta_path = attention_meta_path(dir, stack.record_id(), stack.variant());
  write_text_file(meta_path, meta.dump(2) + "\n");
  return meta_path;
}

CsvTable export_embedding_matrix(std::span<const AttentionStack> stacks, int layer) {
  CsvTable t;
  t.header = {"record_id", "variant"};
  if (stacks.empty()) return t;
  const int dim = stacks.front().embed_dim();
  for (int d = 0; d < dim; ++d) t.header.push_back("d" + std::to_string(d));
  for (const auto& s : stacks) {
    if (layer < 0 || layer >= s.layers())
      throw ValidationError("layer " + std::to_string(layer) + " out of range for (" + s.record_id() + ", " +
                            s.variant() + ")");
    if (s.embed_dim() != dim) throw ValidationError("embedding dimension differs across stacks");
    std::vector<std::string> row{s.record_id(), s.variant()};
    for (double v : s.cls_embedding(layer)) row.push_back(format_exact(v));
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::vector<EmbeddingRow> import_embedding_matrix(const CsvTable& table) {
  if (table.header.size() < 2 || table.header[0] != "record_id" || table.header[1] != "variant")
    throw IoError("embedding matrix header must start with record_id,variant");
  for (std::size_t i = 2; i < table.header.size(); ++i)
    if (table.header[i] != "d" + std::to_string(i - 2)) throw IoError("unexpected column '" + table.header[i] + "'");
  std::vector<EmbeddingRow> out;
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) throw IoError("embedding matrix row has wrong field count");
    EmbeddingRow r{row[0], row[1], {}};
    for (std::size_t i = 2; i < row.size(); ++i) r.values.push_back(parse_double(row[i]));
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace reconprobe
