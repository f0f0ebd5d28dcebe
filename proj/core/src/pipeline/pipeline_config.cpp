#include "codespot/pipeline/pipeline_config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cstdlib>
#include <fmt/format.h>
#include <functional>
#include <sstream>

#include "codespot/corpus/grammar.hpp"
#include "codespot/corpus/vocabulary.hpp"
#include "codespot/util/binary_io.hpp"
#include "codespot/util/error.hpp"

namespace codespot::pipeline {

namespace {

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view what) {
  fail(ErrorKind::kConfig, fmt::format("{}: '{}' is not {}", key, value, what));
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_integer(std::string_view key, std::string_view text) {
  const std::string t = trim(text);
  T v{};
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) bad_value(key, text, "a non-negative integer");
  return v;
}

double parse_double(std::string_view key, std::string_view text) {
  const std::string t = trim(text);
  try {
    std::size_t used = 0;
    const double v = std::stod(t, &used);
    if (used != t.size()) bad_value(key, text, "a number");
    return v;
  } catch (const std::logic_error&) {
    bad_value(key, text, "a number");
  }
}

bool parse_bool(std::string_view key, std::string_view text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  bad_value(key, text, "a boolean");
}

std::vector<std::string> parse_list(std::string_view text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in{std::string(text)};
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

std::string fmt_double(double v) { return fmt::format("{}", v); }

struct Field {
  std::string key;  // section.name
  std::function<void(PipelineConfig&, std::string_view)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

template <typename T>
Field size_field(std::string key, T PipelineConfig::*outer, std::size_t T::*member) {
  return {key,
          [key, outer, member](PipelineConfig& c, std::string_view v) {
            c.*outer.*member = parse_integer<std::size_t>(key, v);
          },
          [outer, member](const PipelineConfig& c) { return std::to_string(c.*outer.*member); }};
}

template <typename T>
Field u64_field(std::string key, T PipelineConfig::*outer, std::uint64_t T::*member) {
  return {key,
          [key, outer, member](PipelineConfig& c, std::string_view v) {
            c.*outer.*member = parse_integer<std::uint64_t>(key, v);
          },
          [outer, member](const PipelineConfig& c) { return std::to_string(c.*outer.*member); }};
}

template <typename T>
Field double_field(std::string key, T PipelineConfig::*outer, double T::*member) {
  return {key,
          [key, outer, member](PipelineConfig& c, std::string_view v) { c.*outer.*member = parse_double(key, v); },
          [outer, member](const PipelineConfig& c) { return fmt_double(c.*outer.*member); }};
}

template <typename Get, typename Set>
Field custom(std::string key, Set set, Get get) {
  return {std::move(key), std::move(set), std::move(get)};
}

const std::vector<Field>& fields() {
  using PC = PipelineConfig;
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    // [model]
    f.push_back(size_field("model.vocab_size", &PC::model, &model::ModelConfig::vocab_size));
    f.push_back(size_field("model.context_len", &PC::model, &model::ModelConfig::context_len));
    f.push_back(size_field("model.d_model", &PC::model, &model::ModelConfig::d_model));
    f.push_back(size_field("model.n_heads", &PC::model, &model::ModelConfig::n_heads));
    f.push_back(size_field("model.n_layers", &PC::model, &model::ModelConfig::n_layers));
    f.push_back(u64_field("model.seed", &PC::model, &model::ModelConfig::seed));
    // [corpus]
    f.push_back(u64_field("corpus.seed", &PC::corpus, &CorpusSettings::seed));
    f.push_back(size_field("corpus.code_docs", &PC::corpus, &CorpusSettings::code_docs));
    f.push_back(size_field("corpus.general_docs", &PC::corpus, &CorpusSettings::general_docs));
    f.push_back(double_field("corpus.split_ratio", &PC::corpus, &CorpusSettings::split_ratio));
    // [languages]
    f.push_back(custom(
        "languages.include", [](PC& c, std::string_view v) { c.include = parse_list(v); },
        [](const PC& c) { return join(c.include); }));
    f.push_back(custom(
        "languages.holdout", [](PC& c, std::string_view v) { c.holdout = trim(v); },
        [](const PC& c) { return c.holdout; }));
    // [pretrain]
    f.push_back(custom(
        "pretrain.steps",
        [](PC& c, std::string_view v) { c.pretrain.train.steps = parse_integer<std::size_t>("pretrain.steps", v); },
        [](const PC& c) { return std::to_string(c.pretrain.train.steps); }));
    f.push_back(custom(
        "pretrain.batch_size",
        [](PC& c, std::string_view v) {
          c.pretrain.train.batch_size = parse_integer<std::size_t>("pretrain.batch_size", v);
        },
        [](const PC& c) { return std::to_string(c.pretrain.train.batch_size); }));
    f.push_back(custom(
        "pretrain.learning_rate",
        [](PC& c, std::string_view v) { c.pretrain.train.learning_rate = parse_double("pretrain.learning_rate", v); },
        [](const PC& c) { return fmt_double(c.pretrain.train.learning_rate); }));
    f.push_back(custom(
        "pretrain.seed",
        [](PC& c, std::string_view v) { c.pretrain.train.seed = parse_integer<std::uint64_t>("pretrain.seed", v); },
        [](const PC& c) { return std::to_string(c.pretrain.train.seed); }));
    f.push_back(custom(
        "pretrain.optimizer",
        [](PC& c, std::string_view v) {
          const std::string t = trim(v);
          if (t == "adam") c.pretrain.optimizer = trainer::Optimizer::kAdam;
          else if (t == "sgd") c.pretrain.optimizer = trainer::Optimizer::kSgd;
          else bad_value("pretrain.optimizer", v, "adam or sgd");
        },
        [](const PC& c) { return std::string(c.pretrain.optimizer == trainer::Optimizer::kAdam ? "adam" : "sgd"); }));
    f.push_back(custom(
        "pretrain.final_lr_fraction",
        [](PC& c, std::string_view v) { c.pretrain.final_lr_fraction = parse_double("pretrain.final_lr_fraction", v); },
        [](const PC& c) { return fmt_double(c.pretrain.final_lr_fraction); }));
    // [finetune]
    f.push_back(custom(
        "finetune.steps",
        [](PC& c, std::string_view v) { c.finetune.steps = parse_integer<std::size_t>("finetune.steps", v); },
        [](const PC& c) { return std::to_string(c.finetune.steps); }));
    f.push_back(custom(
        "finetune.batch_size",
        [](PC& c, std::string_view v) { c.finetune.batch_size = parse_integer<std::size_t>("finetune.batch_size", v); },
        [](const PC& c) { return std::to_string(c.finetune.batch_size); }));
    f.push_back(custom(
        "finetune.learning_rate",
        [](PC& c, std::string_view v) { c.finetune.learning_rate = parse_double("finetune.learning_rate", v); },
        [](const PC& c) { return fmt_double(c.finetune.learning_rate); }));
    f.push_back(custom(
        "finetune.seed",
        [](PC& c, std::string_view v) { c.finetune.seed = parse_integer<std::uint64_t>("finetune.seed", v); },
        [](const PC& c) { return std::to_string(c.finetune.seed); }));
    f.push_back(custom(
        "finetune.gradient_mode",
        [](PC& c, std::string_view v) { c.gradient_mode = importance::parse_gradient_mode(trim(v)); },
        [](const PC& c) { return std::string(importance::to_string(c.gradient_mode)); }));
    // [importance]
    f.push_back(custom(
        "importance.normalize",
        [](PC& c, std::string_view v) { c.normalize = parse_bool("importance.normalize", v); },
        [](const PC& c) { return std::string(c.normalize ? "true" : "false"); }));
    // [ablation]
    f.push_back(custom(
        "ablation.k_list",
        [](PC& c, std::string_view v) {
          c.ablation.k_list.clear();
          for (const auto& item : parse_list(v)) c.ablation.k_list.push_back(parse_double("ablation.k_list", item));
        },
        [](const PC& c) {
          std::vector<std::string> items;
          for (double k : c.ablation.k_list) items.push_back(fmt_double(k));
          return join(items);
        }));
    f.push_back(size_field("ablation.random_seeds", &PC::ablation, &AblationSettings::random_seeds));
    f.push_back(u64_field("ablation.random_seed", &PC::ablation, &AblationSettings::random_seed));
    f.push_back(custom(
        "ablation.bottom_k",
        [](PC& c, std::string_view v) { c.ablation.bottom_k = parse_bool("ablation.bottom_k", v); },
        [](const PC& c) { return std::string(c.ablation.bottom_k ? "true" : "false"); }));
    f.push_back(size_field("ablation.max_eval_docs", &PC::ablation, &AblationSettings::max_eval_docs));
    // [oracle]
    f.push_back(custom(
        "oracle.context_len",
        [](PC& c, std::string_view v) { c.oracle.model.context_len = parse_integer<std::size_t>("oracle.context_len", v); },
        [](const PC& c) { return std::to_string(c.oracle.model.context_len); }));
    f.push_back(custom(
        "oracle.d_model",
        [](PC& c, std::string_view v) { c.oracle.model.d_model = parse_integer<std::size_t>("oracle.d_model", v); },
        [](const PC& c) { return std::to_string(c.oracle.model.d_model); }));
    f.push_back(custom(
        "oracle.n_heads",
        [](PC& c, std::string_view v) { c.oracle.model.n_heads = parse_integer<std::size_t>("oracle.n_heads", v); },
        [](const PC& c) { return std::to_string(c.oracle.model.n_heads); }));
    f.push_back(custom(
        "oracle.n_layers",
        [](PC& c, std::string_view v) { c.oracle.model.n_layers = parse_integer<std::size_t>("oracle.n_layers", v); },
        [](const PC& c) { return std::to_string(c.oracle.model.n_layers); }));
    f.push_back(custom(
        "oracle.seed",
        [](PC& c, std::string_view v) { c.oracle.model.seed = parse_integer<std::uint64_t>("oracle.seed", v); },
        [](const PC& c) { return std::to_string(c.oracle.model.seed); }));
    f.push_back(size_field("oracle.code_docs", &PC::oracle, &OracleSettings::code_docs));
    f.push_back(size_field("oracle.general_docs", &PC::oracle, &OracleSettings::general_docs));
    f.push_back(size_field("oracle.pretrain_steps", &PC::oracle, &OracleSettings::pretrain_steps));
    f.push_back(size_field("oracle.finetune_steps", &PC::oracle, &OracleSettings::finetune_steps));
    f.push_back(size_field("oracle.eval_docs", &PC::oracle, &OracleSettings::eval_docs));
    f.push_back(u64_field("oracle.gradcheck_seed", &PC::oracle, &OracleSettings::gradcheck_seed));
    f.push_back(size_field("oracle.gradcheck_cases_per_op", &PC::oracle, &OracleSettings::gradcheck_cases_per_op));
    f.push_back(double_field("oracle.spearman_bound", &PC::oracle, &OracleSettings::spearman_bound));
    // [output]
    f.push_back(custom(
        "output.run_dir", [](PC& c, std::string_view v) { c.run_dir = trim(v); },
        [](const PC& c) { return c.run_dir.string(); }));
    return f;
  }();
  return table;
}

}  // namespace

void PipelineConfig::set(std::string_view dotted_key, std::string_view value) {
  for (const auto& f : fields()) {
    if (f.key == dotted_key) {
      f.set(*this, value);
      return;
    }
  }
  fail(ErrorKind::kConfig, fmt::format("unknown config key '{}'", dotted_key));
}

std::string PipelineConfig::to_ini() const {
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    const auto dot = f.key.find('.');
    const std::string s = f.key.substr(0, dot);
    if (s != section) {
      out += (section.empty() ? "[" : "\n[") + s + "]\n";
      section = s;
    }
    out += f.key.substr(dot + 1) + " = " + f.get(*this) + "\n";
  }
  return out;
}

void PipelineConfig::validate() const {
  model.validate();
  oracle.model.validate();
  if (model.vocab_size != corpus::Vocabulary::kSize || oracle.model.vocab_size != corpus::Vocabulary::kSize) {
    fail(ErrorKind::kConfig, fmt::format("vocab_size must be {}", corpus::Vocabulary::kSize));
  }
  if (!(corpus.split_ratio > 0.0 && corpus.split_ratio < 1.0)) {
    fail(ErrorKind::kConfig, "corpus.split_ratio must lie in (0, 1)");
  }
  if (include.empty()) fail(ErrorKind::kConfig, "languages.include is empty");
  for (std::size_t i = 0; i < include.size(); ++i) {
    corpus::parse_grammar_id(include[i]);
    for (std::size_t j = 0; j < i; ++j) {
      if (include[i] == include[j]) fail(ErrorKind::kConfig, "language '" + include[i] + "' listed twice");
    }
    if (include[i] == holdout) {
      fail(ErrorKind::kConfig, "hold-out language '" + holdout + "' is also included");
    }
  }
  if (!holdout.empty()) corpus::parse_grammar_id(holdout);
  pretrain.train.validate();
  finetune.validate();
  if (pretrain.train.steps == 0) fail(ErrorKind::kConfig, "pretrain.steps must be positive");
  if (finetune.steps == 0) fail(ErrorKind::kConfig, "finetune.steps must be positive");
  if (!(pretrain.final_lr_fraction > 0.0 && pretrain.final_lr_fraction <= 1.0)) {
    fail(ErrorKind::kConfig, "pretrain.final_lr_fraction must lie in (0, 1]");
  }
  if (ablation.k_list.empty()) fail(ErrorKind::kConfig, "ablation.k_list is empty");
  for (double k : ablation.k_list) {
    if (!(k > 0.0 && k <= 100.0)) fail(ErrorKind::kConfig, fmt::format("k = {} outside (0, 100]", k));
  }
  if (oracle.pretrain_steps == 0 || oracle.finetune_steps == 0 || oracle.eval_docs == 0) {
    fail(ErrorKind::kConfig, "oracle step and document counts must be positive");
  }
  if (oracle.gradcheck_cases_per_op == 0) fail(ErrorKind::kConfig, "oracle.gradcheck_cases_per_op must be positive");
  if (run_dir.empty()) fail(ErrorKind::kConfig, "output.run_dir is empty");
}

PipelineConfig default_config() {
  PipelineConfig c;
  c.pretrain.train = {600, 8, 3e-3, 21};
  c.finetune = {40, 8, 0.05, 31};
  return c;
}

PipelineConfig parse_config(std::string_view ini_text) {
  boost::property_tree::ptree tree;
  std::istringstream in{std::string(ini_text)};
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    fail(ErrorKind::kConfig, std::string("config parse error: ") + e.what());
  }
  PipelineConfig c = default_config();
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      fail(ErrorKind::kConfig, "config key '" + section + "' is outside any section");
    }
    for (const auto& [key, value] : body) c.set(section + "." + key, value.data());
  }
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    fail(ErrorKind::kConfig, e.what());
  }
  PipelineConfig c = parse_config(text);
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) fail(ErrorKind::kConfig, "override '" + o + "' is not key=value");
    c.set(trim(std::string_view(o).substr(0, eq)), std::string_view(o).substr(eq + 1));
  }
  if (const char* env = std::getenv(kRunDirEnv); env != nullptr && *env != '\0') c.run_dir = env;
  c.validate();
  return c;
}

}  // namespace codespot::pipeline
