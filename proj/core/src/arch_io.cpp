#include "budgetface/arch_io.hpp"

#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <vector>

#include "budgetface/error.hpp"
#include "csv_util.hpp"

namespace budgetface {
namespace {

struct Line {
  int number = 0;
  std::string head;
  std::map<std::string, std::string> kv;
  std::vector<std::string> positional;
};

[[noreturn]] void parse_fail(const Line& line, const std::string& msg) {
  fail(ErrorCode::kParseError, "line " + std::to_string(line.number) + ": " + msg);
}

Line tokenize(const std::string& raw, int number) {
  Line line;
  line.number = number;
  std::istringstream ss(raw.substr(0, raw.find('#')));
  std::string tok;
  while (ss >> tok) {
    if (line.head.empty()) {
      line.head = tok;
      continue;
    }
    const auto eq = tok.find('=');
    if (eq == std::string::npos) {
      line.positional.push_back(tok);
      continue;
    }
    if (!line.kv.emplace(tok.substr(0, eq), tok.substr(eq + 1)).second) parse_fail(line, "duplicate key in '" + tok + "'");
  }
  return line;
}

std::int64_t to_int(const Line& line, const std::string& key, const std::string& value) {
  try {
    return detail::parse_int(value, key);
  } catch (const Error&) {
    parse_fail(line, "key '" + key + "' expects an integer, got '" + value + "'");
  }
}

bool to_bool(const Line& line, const std::string& key, const std::string& value) {
  if (value == "1" || value == "true") return true;
  if (value == "0" || value == "false") return false;
  parse_fail(line, "key '" + key + "' expects 0/1, got '" + value + "'");
}

TemplateLayer parse_layer(const Line& line, bool in_block) {
  TemplateLayer t;
  try {
    t.spec.kind = parse_layer_kind(line.head);
  } catch (const Error&) {
    parse_fail(line, "unknown item '" + line.head + "'");
  }
  if (!line.positional.empty()) parse_fail(line, "unexpected token '" + line.positional.front() + "'");
  bool stride_given = false;
  for (const auto& [key, value] : line.kv) {
    if (key == "name") {
      t.spec.name = value;
    } else if (key == "in") {
      t.spec.in_channels = to_int(line, key, value);
    } else if (key == "out") {
      if (value.rfind("$c", 0) == 0) {
        if (!in_block) parse_fail(line, "$c is only valid inside a block");
        t.out_channel_factor = value == "$c" ? 1 : (value.rfind("$c*", 0) == 0 ? to_int(line, key, value.substr(3)) : 0);
        if (t.out_channel_factor <= 0) parse_fail(line, "bad channel expression '" + value + "'");
      } else {
        t.spec.out_channels = to_int(line, key, value);
      }
    } else if (key == "kernel") {
      t.spec.kernel = to_int(line, key, value);
    } else if (key == "stride") {
      stride_given = true;
      if (value == "$s") {
        if (!in_block) parse_fail(line, "$s is only valid inside a block");
        t.stage_stride = true;
      } else {
        t.spec.stride = to_int(line, key, value);
      }
    } else if (key == "padding") {
      t.spec.padding = to_int(line, key, value);
    } else if (key == "bias") {
      t.spec.bias = to_bool(line, key, value);
    } else if (key == "height") {
      t.spec.out_height = to_int(line, key, value);
    } else if (key == "width") {
      t.spec.out_width = to_int(line, key, value);
    } else if (in_block && key == "branch") {
      if (value == "main") t.branch = TemplateLayer::Branch::kMain;
      else if (value == "shortcut") t.branch = TemplateLayer::Branch::kShortcut;
      else parse_fail(line, "branch must be main or shortcut");
    } else if (in_block && key == "when") {
      if (value == "all") t.when = TemplateLayer::When::kAll;
      else if (value == "first") t.when = TemplateLayer::When::kFirst;
      else if (value == "rest") t.when = TemplateLayer::When::kRest;
      else parse_fail(line, "when must be all, first or rest");
    } else {
      parse_fail(line, "unknown key '" + key + "' for " + line.head);
    }
  }
  if (t.spec.kind == LayerKind::kMaxPool && !stride_given) t.spec.stride = t.spec.kernel;
  return t;
}

Stage parse_stage(const Line& line) {
  Stage s;
  bool has_block = false;
  for (const auto& [key, value] : line.kv) {
    if (key == "name") s.name = value;
    else if (key == "block") { s.block = value; has_block = true; }
    else if (key == "repeat") s.repeat = to_int(line, key, value);
    else if (key == "channels") s.channels = to_int(line, key, value);
    else if (key == "stride") s.stride = to_int(line, key, value);
    else if (key == "depth_scale") s.depth_scalable = to_bool(line, key, value);
    else if (key == "width_scale") s.width_scalable = to_bool(line, key, value);
    else parse_fail(line, "unknown stage key '" + key + "'");
  }
  if (!has_block) parse_fail(line, "stage needs block=");
  if (s.repeat < 0 || s.channels <= 0 || s.stride <= 0) parse_fail(line, "stage needs repeat >= 0, channels > 0, stride > 0");
  return s;
}

}  // namespace

ArchSpec parse_arch(std::istream& in) {
  ArchSpec arch;
  arch.items.clear();
  std::string raw;
  int number = 0;
  BlockTemplate* open_block = nullptr;
  while (std::getline(in, raw)) {
    const Line line = tokenize(raw, ++number);
    if (line.head.empty()) continue;

    if (line.head == "end") {
      if (open_block == nullptr) parse_fail(line, "'end' without 'block'");
      open_block = nullptr;
    } else if (line.head == "block") {
      if (open_block != nullptr) parse_fail(line, "nested block");
      if (line.positional.size() != 1) parse_fail(line, "block needs exactly one name");
      BlockTemplate b;
      b.name = line.positional.front();
      for (const auto& [key, value] : line.kv) {
        if (key == "residual") b.residual = to_bool(line, key, value);
        else parse_fail(line, "unknown block key '" + key + "'");
      }
      auto [it, inserted] = arch.blocks.emplace(b.name, b);
      if (!inserted) parse_fail(line, "duplicate block '" + b.name + "'");
      open_block = &it->second;
    } else if (open_block != nullptr) {
      open_block->layers.push_back(parse_layer(line, true));
    } else if (line.head == "name") {
      if (line.positional.size() != 1 || !line.kv.empty()) parse_fail(line, "name takes one token");
      arch.name = line.positional.front();
    } else if (line.head == "input") {
      for (const auto& [key, value] : line.kv) {
        if (key == "channels") arch.input.channels = to_int(line, key, value);
        else if (key == "height") arch.input.height = to_int(line, key, value);
        else if (key == "width") arch.input.width = to_int(line, key, value);
        else parse_fail(line, "unknown input key '" + key + "'");
      }
      if (arch.input.elements() <= 0 || arch.input.channels <= 0) parse_fail(line, "input shape must be positive");
    } else if (line.head == "stage") {
      arch.items.emplace_back(parse_stage(line));
    } else {
      arch.items.emplace_back(parse_layer(line, false).spec);
    }
  }
  if (open_block != nullptr) fail(ErrorCode::kParseError, "block '" + open_block->name + "' not closed");
  for (const auto* s : arch.stages())
    require(arch.blocks.count(s->block) == 1, ErrorCode::kParseError,
            "stage '" + s->name + "' references unknown block '" + s->block + "'");
  return arch;
}

ArchSpec parse_arch_string(const std::string& text) {
  std::istringstream in(text);
  return parse_arch(in);
}

ArchSpec load_arch(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIoError, "cannot open " + path);
  return parse_arch(in);
}

namespace {

void write_layer(std::ostream& out, const LayerSpec& l, const TemplateLayer* t) {
  out << to_string(l.kind);
  if (!l.name.empty()) out << " name=" << l.name;
  if (t != nullptr && t->branch == TemplateLayer::Branch::kShortcut) out << " branch=shortcut";
  if (t != nullptr && t->when == TemplateLayer::When::kFirst) out << " when=first";
  if (t != nullptr && t->when == TemplateLayer::When::kRest) out << " when=rest";
  if (l.in_channels != 0) out << " in=" << l.in_channels;
  if (t != nullptr && t->out_channel_factor > 0)
    out << " out=$c" << (t->out_channel_factor == 1 ? "" : "*" + std::to_string(t->out_channel_factor));
  else if (l.out_channels != 0)
    out << " out=" << l.out_channels;
  const bool spatial = l.kind == LayerKind::kConv2d || l.kind == LayerKind::kMaxPool;
  if (spatial) {
    out << " kernel=" << l.kernel;
    if (t != nullptr && t->stage_stride) out << " stride=$s";
    else out << " stride=" << l.stride;
    out << " padding=" << l.padding;
  }
  if (l.bias) out << " bias=1";
  if (l.out_height != 0) out << " height=" << l.out_height;
  if (l.out_width != 0) out << " width=" << l.out_width;
  out << '\n';
}

}  // namespace

void write_arch(std::ostream& out, const ArchSpec& arch) {
  if (!arch.name.empty()) out << "name " << arch.name << '\n';
  out << "input channels=" << arch.input.channels << " height=" << arch.input.height << " width=" << arch.input.width
      << '\n';
  for (const auto& [name, block] : arch.blocks) {
    out << "block " << name << " residual=" << (block.residual ? 1 : 0) << '\n';
    for (const auto& t : block.layers) {
      out << "  ";
      write_layer(out, t.spec, &t);
    }
    out << "end\n";
  }
  for (const auto& item : arch.items) {
    if (const auto* l = std::get_if<LayerSpec>(&item)) {
      write_layer(out, *l, nullptr);
      continue;
    }
    const auto& s = std::get<Stage>(item);
    out << "stage";
    if (!s.name.empty()) out << " name=" << s.name;
    out << " block=" << s.block << " repeat=" << s.repeat << " channels=" << s.channels << " stride=" << s.stride;
    if (!s.depth_scalable) out << " depth_scale=0";
    if (!s.width_scalable) out << " width_scale=0";
    out << '\n';
  }
}

}  // namespace budgetface
