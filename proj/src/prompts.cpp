#include "ccvqa/prompts.hpp"

#include "ccvqa/errors.hpp"

namespace ccvqa::prompts {

namespace assets {
extern const std::string_view kParametricContext;
extern const std::string_view kQuestionRewrite;
extern const std::string_view kVisualRationale;
extern const std::string_view kConflictAnalysis;
extern const std::string_view kFinalAnswer;
}  // namespace assets

std::string_view text(Template t) {
  switch (t) {
    case Template::parametric_context: return assets::kParametricContext;
    case Template::question_rewrite: return assets::kQuestionRewrite;
    case Template::visual_rationale: return assets::kVisualRationale;
    case Template::conflict_analysis: return assets::kConflictAnalysis;
    case Template::final_answer: return assets::kFinalAnswer;
  }
  throw ParameterError("unknown prompt template");
}

std::string_view asset_name(Template t) {
  switch (t) {
    case Template::parametric_context: return "parametric_context";
    case Template::question_rewrite: return "question_rewrite";
    case Template::visual_rationale: return "visual_rationale";
    case Template::conflict_analysis: return "conflict_analysis";
    case Template::final_answer: return "final_answer";
  }
  throw ParameterError("unknown prompt template");
}

std::vector<Template> all_templates() {
  return {Template::parametric_context, Template::question_rewrite, Template::visual_rationale,
          Template::conflict_analysis, Template::final_answer};
}

std::string render(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        const std::string name(tmpl.substr(i + 1, close - i - 1));
        if (auto it = values.find(name); it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i]);
    ++i;
  }
  return out;
}

std::string parametric_context(const std::string& question) {
  return render(text(Template::parametric_context), {{"Question", question}});
}

std::string question_rewrite(const std::string& question) {
  return render(text(Template::question_rewrite), {{"Question", question}});
}

std::string visual_rationale(const std::string& question, const std::string& section) {
  return render(text(Template::visual_rationale), {{"Question", question}, {"section", section}});
}

std::string conflict_analysis(const std::string& question, const std::string& reasons_text) {
  return render(text(Template::conflict_analysis),
                {{"Question", question}, {"Reasons text", reasons_text}});
}

std::string final_answer(const std::string& question, const std::string& features,
                         const std::string& retrieved_information) {
  return render(text(Template::final_answer), {{"Question", question},
                                               {"Features", features},
                                               {"Retrieved Information", retrieved_information}});
}

namespace {

constexpr std::string_view kFeatures = "{Features}";
constexpr std::string_view kInformation = "{Retrieved Information}";

}  // namespace

FinalAnswerParts final_answer_parts(const std::string& question) {
  const std::string_view t = text(Template::final_answer);
  const auto f = t.find(kFeatures);
  const auto r = t.find(kInformation);
  if (f == std::string_view::npos || r == std::string_view::npos || r < f) {
    throw ParameterError("final-answer template lacks its slots");
  }
  FinalAnswerParts parts;
  parts.before_features = render(t.substr(0, f), {{"Question", question}});
  parts.between = std::string(t.substr(f + kFeatures.size(), r - f - kFeatures.size()));
  parts.after = std::string(t.substr(r + kInformation.size()));
  return parts;
}

VanillaParts vanilla_answer_parts(const std::string& question) {
  // "Here is the question: Q. " + "Here is the retrieved information: " + info + ". Short Answer:"
  const std::string_view t = text(Template::final_answer);
  const auto feature_clause = t.find("Here is the feature to focus on:");
  const auto info_clause = t.find("Here is the retrieved information:");
  const auto r = t.find(kInformation);
  if (feature_clause == std::string_view::npos || info_clause == std::string_view::npos ||
      r == std::string_view::npos) {
    throw ParameterError("final-answer template lacks its clauses");
  }
  VanillaParts parts;
  parts.before_information = render(t.substr(0, feature_clause), {{"Question", question}}) +
                             std::string(t.substr(info_clause, r - info_clause));
  parts.after = std::string(t.substr(r + kInformation.size()));
  return parts;
}

std::string parametric_answer(const std::string& question) {
  const std::string_view t = text(Template::final_answer);
  const auto feature_clause = t.find("Here is the feature to focus on:");
  const auto r = t.find(kInformation);
  return render(t.substr(0, feature_clause), {{"Question", question}}) +
         std::string(t.substr(r + kInformation.size() + 2));
}

}  // namespace ccvqa::prompts
