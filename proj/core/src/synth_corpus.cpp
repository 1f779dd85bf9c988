// Copyright 2026 The ERU Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "eru/synth_corpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "eru/error.hpp"
#include "eru/parallel.hpp"
#include "eru/vocab.hpp"

namespace eru {

using nlohmann::json;

namespace {

using Words = std::vector<std::string_view>;

const Words kSurnames = {"zhang", "wang", "li",    "liu",   "chen",  "yang",   "huang",  "zhao",  "wu",
                         "zhou",  "xu",   "sun",   "ma",    "zhu",   "hu",     "guo",    "he",    "lin",
                         "luo",   "gao",  "smith", "brown", "jones", "miller", "garcia", "lopez", "taylor"};
const Words kGiven = {"wei",  "fang",  "na",   "min",  "jing",  "qiang", "lei",  "jun",   "yan",
                      "jie",  "tao",   "ming", "chao", "xiu",   "xia",   "hong", "ping",  "hui",
                      "anna", "james", "mary", "john", "linda", "david", "emma", "kevin", "lucy"};
const Words kCities = {"beijing", "shanghai", "nanjing", "wuhan",  "hangzhou", "xian",   "chengdu", "tianjin",
                       "harbin",  "dalian",   "xiamen",  "jinan",  "suzhou",   "boston", "austin",  "toronto"};
const Words kSchoolKinds = {"university", "normal university", "institute of technology",
                            "university of science and technology", "polytechnic university", "college"};
const Words kMajors = {"computer science",      "software engineering", "electrical engineering", "accounting",
                       "marketing",             "mathematics",          "automation",             "finance",
                       "information management", "mechanical engineering", "international trade",  "statistics",
                       "communication engineering", "human resource management"};
const Words kDegrees = {"bachelor", "master", "phd", "bachelor of science", "master of engineering",
                        "bachelor degree", "master degree", "associate degree"};
const Words kCompanyStems = {"huawei", "tencent", "alibaba", "baidu", "jingdong", "xiaomi", "lenovo", "haier",
                             "zte",    "meituan", "netease", "sinosoft", "neusoft", "kingsoft", "inspur", "ctrip"};
const Words kCompanyKinds = {"technology co., ltd.", "network co., ltd.", "group", "electronics co., ltd.",
                             "software co., ltd.",   "information technology co., ltd.", "inc."};
const Words kPositions = {"java develop engineer", "software engineer",   "product manager",   "sales manager",
                          "data analyst",          "frontend developer",  "accountant",        "test engineer",
                          "operations specialist", "hr specialist",       "algorithm engineer", "marketing assistant",
                          "senior developer",      "technical support engineer", "financial analyst"};
const Words kWorkVerbs = {"responsible for", "handled", "managed", "maintained", "coordinated", "supported",
                          "led",             "reported", "organized", "negotiated"};
const Words kWorkObjects = {"daily operation", "customer relations", "sales targets", "quarterly reports",
                            "team meetings",   "client accounts",    "vendor contracts", "budget planning",
                            "staff training",  "market research",    "online services", "system maintenance"};
const Words kWorkTails = {"of the department", "for key customers", "across regions", "with other teams",
                          "in a team of eight", "to improve efficiency", "under tight schedules", "every week"};
const Words kProjectAdj = {"smart", "online", "intelligent", "mobile", "distributed", "cloud", "campus", "medical"};
const Words kProjectNoun = {"campus", "library", "retail", "logistics", "payment", "ticketing", "inventory", "hospital"};
const Words kProjectKind = {"management system", "platform", "app", "service", "mini program", "portal"};
const Words kRoles = {"team leader", "backend developer", "core member", "module owner", "frontend developer",
                      "project lead", "research assistant", "tester"};
const Words kProjectVerbs = {"designed", "implemented", "developed", "optimized", "refactored", "deployed", "built"};
const Words kProjectObjects = {"the login module", "the database schema", "the rest api", "the cache layer",
                               "the recommendation engine", "the data pipeline", "the user interface",
                               "the message queue"};
const Words kProjectTech = {"using spring boot", "with mysql and redis", "on linux servers", "with vue and node",
                            "in python", "using docker", "with kafka", "based on tensorflow"};
const Words kSkills = {"java", "python", "c++", "sql", "linux", "excel", "photoshop", "spring", "mysql", "redis",
                       "docker", "git", "hadoop", "matlab", "office", "english cet-6", "javascript", "pytorch"};
const Words kSkillLead = {"proficient in", "familiar with", "skilled in", "good at", "experienced with"};
const Words kOtherLines = {"hobbies: reading, hiking and music",
                           "self evaluation: honest, hardworking and responsible",
                           "willing to travel for business",
                           "expected salary: negotiable",
                           "date of birth: 1995.03",
                           "political status: party member",
                           "interests: basketball, swimming, photography",
                           "available to start immediately",
                           "references available upon request",
                           "strong communication and teamwork skills"};
const Words kAddressStarts = {"address:", "home:", "location:"};

struct Heading {
  std::string_view block;
  Words variants;
};
const std::array<Heading, 6> kHeadings = {{{"personal", {"personal information", "basic info", "profile"}},
                                           {"education", {"education", "education background", "academic history"}},
                                           {"work", {"work experience", "employment history", "career"}},
                                           {"project", {"project experience", "projects", "selected projects"}},
                                           {"skill", {"skills", "professional skills", "technical skills"}},
                                           {"other", {"others", "additional information", "personal statement"}}}};

std::string pick(Rng& rng, const Words& words) { return std::string(rng.pick(words)); }

std::string digits(Rng& rng, std::size_t n) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s.push_back(static_cast<char>('0' + rng.index(10)));
  return s;
}

std::string time_range(Rng& rng) {
  const int start = 2008 + static_cast<int>(rng.index(12));
  const int end = start + 1 + static_cast<int>(rng.index(4));
  char buf[64];
  const int m1 = 1 + static_cast<int>(rng.index(12)), m2 = 1 + static_cast<int>(rng.index(12));
  switch (rng.index(3)) {
    case 0: std::snprintf(buf, sizeof buf, "%d.%02d - %d.%02d", start, m1, end, m2); break;
    case 1: std::snprintf(buf, sizeof buf, "%d/%02d - present", start, m1); break;
    default: std::snprintf(buf, sizeof buf, "%d.%02d-%d.%02d", start, m1, end, m2); break;
  }
  return buf;
}

std::string sentence(Rng& rng, const Words& verbs, const Words& objects, const Words& tails, std::size_t words) {
  std::string s;
  std::size_t count = 0;
  while (count < words) {
    std::string clause = pick(rng, verbs) + " " + pick(rng, objects) + " " + pick(rng, tails);
    count += split_words(clause).size() + 1;
    s += (s.empty() ? "" : ", ") + clause;
  }
  return s + ".";
}

struct Item {
  std::string text;
  std::string block;
  std::string field;
  bool heading = false;
  double x0 = 0;     // left edge in page units, or right edge when right_aligned
  bool right_aligned = false;
  double font = 10;  // text height in page units
};

using Row = std::vector<Item>;

Item item(std::string text, std::string block, std::string field, double x0, double font = 10) {
  return {std::move(text), std::move(block), std::move(field), false, x0, false, font};
}

Row heading_row(Rng& rng, std::string_view block, double left) {
  for (const auto& h : kHeadings) {
    if (h.block == block) {
      Item it{pick(rng, h.variants), "other", "other", true, left, false, 14};
      return {it};
    }
  }
  return {};
}

std::vector<Row> entry_rows(Rng& rng, const std::string& block, const CorpusProfile& p) {
  const double left = p.margin, right = p.page_width - p.margin;
  const double mid = p.margin + 0.45 * (right - left);
  std::vector<Row> rows;
  auto description = [&](const std::string& field, const Words& verbs, const Words& objects, const Words& tails) {
    const std::size_t lines = p.description_lines_min + rng.index(p.description_lines_max - p.description_lines_min + 1);
    for (std::size_t l = 0; l < lines; ++l) {
      const std::size_t words = p.description_words_min + rng.index(p.description_words_max - p.description_words_min + 1);
      rows.push_back({item(sentence(rng, verbs, objects, tails, words), block, field, left + 12)});
    }
  };
  auto timed = [&](Item lead) {
    Item t = item(time_range(rng), block, block + ".time", right);
    t.right_aligned = true;
    rows.push_back({std::move(lead), std::move(t)});
  };
  if (block == "education") {
    std::string school = rng.bernoulli(0.5) ? pick(rng, kCities) + " " + pick(rng, kSchoolKinds)
                                            : "university of " + pick(rng, kCities);
    timed(item(std::move(school), block, "education.school", left, 11));
    rows.push_back({item(pick(rng, kMajors), block, "education.major", left),
                    item(pick(rng, kDegrees), block, "education.degree", mid)});
  } else if (block == "work") {
    timed(item(pick(rng, kCompanyStems) + " " + pick(rng, kCompanyKinds), block, "work.company", left, 11));
    rows.push_back({item(pick(rng, kPositions), block, "work.position", left)});
    description("work.description", kWorkVerbs, kWorkObjects, kWorkTails);
  } else if (block == "project") {
    timed(item(pick(rng, kProjectAdj) + " " + pick(rng, kProjectNoun) + " " + pick(rng, kProjectKind), block,
               "project.name", left, 11));
    rows.push_back({item(pick(rng, kRoles), block, "project.role", left)});
    description("project.description", kProjectVerbs, kProjectObjects, kProjectTech);
  } else if (block == "skill") {
    Row row;
    const std::size_t n = 1 + rng.index(3);
    for (std::size_t k = 0; k < n; ++k) {
      std::string text = pick(rng, kSkillLead) + " " + pick(rng, kSkills);
      if (rng.bernoulli(0.5)) text += " and " + pick(rng, kSkills);
      row.push_back(item(std::move(text), block, "skill.item", left + static_cast<double>(k) * (right - left) / 3.0));
    }
    rows.push_back(std::move(row));
  } else {
    rows.push_back({item(pick(rng, kOtherLines), "other", "other", left)});
  }
  return rows;
}

std::size_t row_segments(const std::vector<Row>& rows) {
  std::size_t n = 0;
  for (const auto& r : rows) n += r.size();
  return n;
}

const std::array<std::string_view, 5> kSectionOrder = {"education", "work", "project", "skill", "other"};

}  // namespace

TextStyle style_for(const std::string& block, const std::string& field, bool heading) {
  TextStyle s;
  if (heading) {
    s.glyph_height = 14;
    s.advance = 8;
    s.stroke = 2;
    s.ink = 1.0f;
    s.underline = true;
    return s;
  }
  if (block == "personal") {
    s.glyph_height = field == "personal.name" ? 16 : 9;
    s.advance = field == "personal.name" ? 9 : 6;
    s.stroke = field == "personal.name" ? 2 : 1;
    s.ink = 0.95f;
  } else if (block == "education") {
    s.glyph_height = 10;
    s.ink = 0.9f;
  } else if (block == "work") {
    s.glyph_height = 10;
    s.ink = 0.7f;
    s.slant = 3;
  } else if (block == "project") {
    s.glyph_height = 9;
    s.ink = 0.8f;
    s.advance = 7;
  } else if (block == "skill") {
    s.glyph_height = 8;
    s.advance = 5;
    s.frame = true;
  } else {
    s.glyph_height = 8;
    s.ink = 0.55f;
  }
  if (field == "education.school" || field == "work.company" || field == "project.name") s.stroke = 2;
  if (field.size() > 5 && field.compare(field.size() - 5, 5, ".time") == 0) s.advance = std::max<std::size_t>(4, s.advance - 1);
  return s;
}

GlyphRaster render_crop(const std::string& text, const TextStyle& style, std::uint64_t seed,
                        const CropGeometry& geometry) {
  GlyphRaster r(geometry.height, geometry.width);
  const double inner = 1.0 / (1.0 + 2.0 * geometry.enlarge);
  const auto margin_x = static_cast<std::size_t>(std::lround(0.5 * (1.0 - inner) * static_cast<double>(geometry.width)));
  const std::size_t gh = std::min(style.glyph_height, geometry.height);
  const std::size_t top = (geometry.height - gh) / 2;
  const std::size_t cell = std::max<std::size_t>(2, style.advance) - 1;
  std::size_t right_edge = margin_x;
  std::size_t x = margin_x;
  for (unsigned char c : text) {
    if (x + cell + style.slant >= geometry.width - margin_x) break;
    if (c != ' ') {
      const std::uint64_t bits = mix64(0x51ed270b27a1ULL ^ static_cast<std::uint64_t>(c));
      for (std::size_t yy = 0; yy < gh; ++yy) {
        const std::size_t gy = yy * 7 / gh;
        const std::size_t shift = style.slant * (gh - 1 - yy) / std::max<std::size_t>(1, gh);
        for (std::size_t xx = 0; xx < cell; ++xx) {
          const std::size_t gx = xx * 5 / cell;
          if (!((bits >> (gy * 5 + gx)) & 1ULL)) continue;
          for (std::size_t k = 0; k < style.stroke; ++k) {
            const std::size_t px = x + xx + shift + k;
            if (px < geometry.width) r.at(top + yy, px) = style.ink;
          }
        }
      }
      right_edge = x + cell + style.slant;
    }
    x += style.advance;
  }
  if (style.underline && top + gh + 1 < geometry.height) {
    for (std::size_t px = margin_x; px < right_edge; ++px) r.at(top + gh + 1, px) = style.ink;
  }
  if (style.frame && top >= 2 && top + gh + 1 < geometry.height) {
    const std::size_t y0 = top - 2, y1 = top + gh + 1;
    const std::size_t x0 = margin_x > 2 ? margin_x - 2 : 0, x1 = std::min(geometry.width - 1, right_edge + 1);
    for (std::size_t px = x0; px <= x1; ++px) r.at(y0, px) = r.at(y1, px) = style.ink;
    for (std::size_t py = y0; py <= y1; ++py) r.at(py, x0) = r.at(py, x1) = style.ink;
  }
  if (style.noise > 0) {
    Rng rng(seed);
    for (auto& v : r.pixels) v = std::clamp(v + static_cast<float>(rng.normal()) * style.noise, 0.0f, 1.0f);
  }
  quantize(r);
  return r;
}

void CorpusProfile::validate() const {
  if (!(target_avg_segments > 0) || !(target_avg_seg_tokens > 0) || !(target_avg_pages > 0)) {
    fail(ErrorKind::kConfig, "profile " + name + ": targets must be positive");
  }
  if (target_avg_segments * 1.3 > 256) fail(ErrorKind::kConfig, "profile " + name + ": segment target exceeds the 256-segment cap");
  double sum = 0;
  for (const auto& [block, p] : block_frequency) {
    if (p < 0) fail(ErrorKind::kConfig, "profile " + name + ": negative block frequency");
    if (std::find(kSectionOrder.begin(), kSectionOrder.end(), block) == kSectionOrder.end()) {
      fail(ErrorKind::kConfig, "profile " + name + ": unknown block " + block);
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) fail(ErrorKind::kConfig, "profile " + name + ": block frequencies must sum to 1");
  if (max_pages == 0 || row_pitch <= 0 || page_height <= 2 * margin + row_pitch) {
    fail(ErrorKind::kConfig, "profile " + name + ": page geometry is infeasible");
  }
  if (description_lines_min > description_lines_max || description_words_min > description_words_max ||
      description_words_min == 0) {
    fail(ErrorKind::kConfig, "profile " + name + ": description ranges are inverted");
  }
}

json CorpusProfile::to_json() const {
  json freq = json::object();
  for (const auto& [b, p] : block_frequency) freq[b] = p;
  return {{"name", name},
          {"target_avg_segments", target_avg_segments},
          {"target_avg_seg_tokens", target_avg_seg_tokens},
          {"target_avg_pages", target_avg_pages},
          {"block_frequency", freq},
          {"max_pages", max_pages},
          {"page_width", page_width},
          {"page_height", page_height},
          {"margin", margin},
          {"row_pitch", row_pitch},
          {"description_lines", {description_lines_min, description_lines_max}},
          {"description_words", {description_words_min, description_words_max}},
          {"seed", seed}};
}

CorpusProfile desk_profile(std::uint64_t seed) {
  CorpusProfile p;
  p.name = "desk";
  p.target_avg_segments = 30.0;
  p.target_avg_seg_tokens = 6.0;
  p.target_avg_pages = 1.0;
  p.block_frequency = {{"education", 0.25}, {"work", 0.3}, {"project", 0.25}, {"skill", 0.12}, {"other", 0.08}};
  p.max_pages = 1;
  p.row_pitch = 18.0;
  p.description_lines_min = 1;
  p.description_lines_max = 2;
  p.description_words_min = 5;
  p.description_words_max = 10;
  p.seed = seed;
  return p;
}

CorpusProfile paper_stats_profile(std::uint64_t seed) {
  CorpusProfile p;
  p.name = "paper-stats";
  p.target_avg_segments = 88.90;
  p.target_avg_seg_tokens = 18.94;
  p.target_avg_pages = 1.95;
  p.block_frequency = {{"education", 0.2}, {"work", 0.35}, {"project", 0.3}, {"skill", 0.1}, {"other", 0.05}};
  p.max_pages = 4;
  p.row_pitch = 15.0;
  p.description_lines_min = 3;
  p.description_lines_max = 6;
  p.description_words_min = 28;
  p.description_words_max = 40;
  p.seed = seed;
  return p;
}

CorpusProfile profile_by_name(const std::string& name, std::uint64_t seed) {
  if (name == "desk") return desk_profile(seed);
  if (name == "paper-stats") return paper_stats_profile(seed);
  fail(ErrorKind::kConfig, "unknown corpus profile '" + name + "' (expected desk or paper-stats)");
}

ResumeDoc generate_document(const CorpusProfile& profile, std::size_t index, const GenerateOptions& options) {
  profile.validate();
  const std::uint64_t doc_seed = child_seed(child_seed(profile.seed, fnv1a(options.split)), index);
  Rng rng(doc_seed);
  const double left = profile.margin, right = profile.page_width - profile.margin;

  // Personal block first.
  std::vector<Row> personal;
  if (rng.bernoulli(0.5)) personal.push_back(heading_row(rng, "personal", left));
  const std::string given = pick(rng, kGiven), surname = pick(rng, kSurnames);
  personal.push_back({item(given + " " + surname, "personal", "personal.name", left, 16)});
  std::string phone = digits(rng, 3) + "-" + digits(rng, 4) + "-" + digits(rng, 4);
  if (rng.bernoulli(0.5)) phone = (rng.bernoulli(0.5) ? "tel: " : "phone: ") + phone;
  const std::string email = given + "." + surname + digits(rng, 2) + "@" +
                            (rng.bernoulli(0.5) ? "mail.com" : rng.bernoulli(0.5) ? "qq.com" : "outlook.com");
  personal.push_back({item(phone, "personal", "personal.phone", left),
                      item((rng.bernoulli(0.3) ? "email: " : "") + email, "personal", "personal.email", left + 0.45 * (right - left))});
  if (rng.bernoulli(0.4)) {
    personal.push_back({item(pick(rng, kAddressStarts) + " " + std::to_string(1 + rng.index(300)) + " " + pick(rng, kCities) +
                                 " road, " + pick(rng, kCities),
                             "other", "other", left)});
  }

  // Entries drawn by block frequency until the segment target is reached.
  const double target = profile.target_avg_segments * rng.uniform(0.75, 1.25);
  std::size_t count = row_segments(personal);
  std::vector<std::vector<std::vector<Row>>> sections(kSectionOrder.size());
  std::vector<double> cdf;
  double acc = 0;
  for (const auto& [b, p] : profile.block_frequency) cdf.push_back(acc += p);
  while (static_cast<double>(count) + 1.5 < target) {
    const double u = rng.uniform() * acc;
    const std::size_t pick_idx = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    const std::string block = profile.block_frequency[std::min(pick_idx, cdf.size() - 1)].first;
    const std::size_t s = static_cast<std::size_t>(
        std::find(kSectionOrder.begin(), kSectionOrder.end(), block) - kSectionOrder.begin());
    auto rows = entry_rows(rng, block, profile);
    count += row_segments(rows) + (sections[s].empty() ? 1 : 0);
    sections[s].push_back(std::move(rows));
  }
  std::vector<std::size_t> order{0, 1, 2, 3, 4};
  if (rng.bernoulli(0.3)) std::swap(order[0], order[1]);

  std::vector<Row> rows = personal;
  for (auto s : order) {
    if (sections[s].empty()) continue;
    rows.push_back(heading_row(rng, kSectionOrder[s], left));
    for (auto& entry : sections[s]) {
      for (auto& r : entry) rows.push_back(std::move(r));
    }
  }

  // Flow rows top to bottom across pages; rows past the last page are dropped.
  ResumeDoc doc;
  char id[96];
  std::snprintf(id, sizeof id, "%s-%06zu", options.split.c_str(), index);
  doc.id = id;
  std::size_t page = 0;
  double y = profile.margin;
  const double bottom = profile.page_height - profile.margin;
  for (const auto& row : rows) {
    const bool big = std::any_of(row.begin(), row.end(), [](const Item& it) { return it.font > 12; });
    const double pitch = profile.row_pitch * (big ? 1.4 : 1.0);
    if (y + pitch > bottom) {
      if (page + 1 >= profile.max_pages) break;
      ++page;
      y = profile.margin;
    }
    for (const auto& it : row) {
      Segment s;
      s.id = static_cast<std::int64_t>(doc.segments.size());
      s.text = it.text;
      s.page = page;
      const double width = std::min(right - left, 0.5 * it.font * static_cast<double>(it.text.size()));
      double x0 = it.right_aligned ? it.x0 - width : it.x0;
      x0 = std::clamp(x0, left, right - 1.0);
      s.bbox = {x0, y, std::min(right, x0 + width), y + it.font};
      if (options.render) {
        s.crop = render_crop(it.text, style_for(it.block, it.field, it.heading), child_seed(doc_seed, s.id + 1000003ULL),
                             options.crop);
      }
      if (options.labeled) {
        s.label_seg = it.field;
        s.label_block = it.block;
      }
      doc.segments.push_back(std::move(s));
    }
    y += pitch;
  }
  doc.pages.assign(page + 1, PageSize{profile.page_width, profile.page_height});
  return doc;
}

std::vector<ResumeDoc> generate_corpus(const CorpusProfile& profile, std::size_t n_docs, const GenerateOptions& options) {
  if (n_docs == 0) fail(ErrorKind::kValidation, "generate_corpus: n_docs must be at least 1");
  profile.validate();
  std::vector<ResumeDoc> docs(n_docs);
  parallel_for(n_docs, options.threads, [&](std::size_t i) { docs[i] = generate_document(profile, i, options); });
  return docs;
}

json CorpusStats::to_json() const {
  return {{"docs", docs}, {"avg_segments", avg_segments}, {"avg_seg_tokens", avg_seg_tokens}, {"avg_pages", avg_pages}};
}

CorpusStats corpus_stats(const std::vector<ResumeDoc>& corpus) {
  if (corpus.empty()) fail(ErrorKind::kValidation, "corpus_stats: empty corpus");
  CorpusStats st;
  st.docs = corpus.size();
  std::size_t segments = 0, tokens = 0, pages = 0;
  for (const auto& d : corpus) {
    segments += d.segments.size();
    pages += d.pages.size();
    for (const auto& s : d.segments) tokens += split_words(s.text).size();
  }
  st.avg_segments = static_cast<double>(segments) / static_cast<double>(st.docs);
  st.avg_seg_tokens = segments ? static_cast<double>(tokens) / static_cast<double>(segments) : 0.0;
  st.avg_pages = static_cast<double>(pages) / static_cast<double>(st.docs);
  return st;
}

NeighborHeatmap neighbor_heatmap(const std::vector<ResumeDoc>& corpus, const LabelSchema& schema) {
  NeighborHeatmap h;
  for (std::size_t f = 0; f < schema.field_count(); ++f) h.labels.push_back(schema.field_name(f));
  h.counts.assign(schema.field_count(), std::vector<std::size_t>(schema.field_count(), 0));
  for (const auto& doc : corpus) {
    std::vector<std::size_t> cls;
    for (const auto& s : doc.segments) {
      if (!s.label_seg) fail(ErrorKind::kValidation, "neighbor_heatmap: document " + doc.id + " is unlabeled");
      const auto f = schema.field_index(*s.label_seg);
      if (!f) fail(ErrorKind::kValidation, "neighbor_heatmap: unknown field " + *s.label_seg);
      cls.push_back(*f);
    }
    const auto& segs = doc.segments;
    for (std::size_t i = 0; i < segs.size(); ++i) {
      double best = 0;
      std::size_t arg = segs.size();
      for (std::size_t j = 0; j < segs.size(); ++j) {
        if (j == i || segs[j].page != segs[i].page) continue;
        const double dx = segs[j].bbox.cx() - segs[i].bbox.cx(), dy = segs[j].bbox.cy() - segs[i].bbox.cy();
        const double d = dx * dx + dy * dy;
        if (arg == segs.size() || d < best) {
          best = d;
          arg = j;
        }
      }
      if (arg != segs.size()) ++h.counts[cls[i]][cls[arg]];
    }
  }
  return h;
}

std::string NeighborHeatmap::csv() const {
  std::string out = "class";
  for (const auto& l : labels) out += "," + l;
  out += "\n";
  for (std::size_t a = 0; a < labels.size(); ++a) {
    out += labels[a];
    for (auto c : counts[a]) out += "," + std::to_string(c);
    out += "\n";
  }
  return out;
}

double NeighborHeatmap::same_block_share(const LabelSchema& schema) const {
  std::size_t same = 0, total = 0;
  for (std::size_t a = 0; a < counts.size(); ++a) {
    for (std::size_t b = 0; b < counts.size(); ++b) {
      total += counts[a][b];
      if (schema.owner_block(a) == schema.owner_block(b)) same += counts[a][b];
    }
  }
  return total ? static_cast<double>(same) / static_cast<double>(total) : 0.0;
}

void write_corpus(const std::filesystem::path& dir, const std::vector<ResumeDoc>& docs, const json& manifest_extra) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());
  json files = json::array();
  for (const auto& d : docs) {
    const std::string name = d.id + ".json";
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::kIo, "cannot write " + (dir / name).string());
    out << serialize_document(d);
    files.push_back(name);
  }
  json manifest = manifest_extra;
  manifest["files"] = files;
  manifest["stats"] = corpus_stats(docs).to_json();
  std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write manifest in " + dir.string());
  out << manifest.dump(1) << "\n";
}

std::vector<ResumeDoc> load_corpus(const std::filesystem::path& dir, const LoadOptions& options) {
  if (!std::filesystem::is_directory(dir)) fail(ErrorKind::kIo, "corpus directory " + dir.string() + " not found");
  std::vector<std::string> names;
  const auto manifest_path = dir / "manifest.json";
  if (std::filesystem::exists(manifest_path)) {
    std::ifstream in(manifest_path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
      names = json::parse(ss.str()).at("files").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      fail(ErrorKind::kFormat, manifest_path.string() + ": " + e.what());
    }
  } else {
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
      if (e.path().extension() == ".json") names.push_back(e.path().filename().string());
    }
    std::sort(names.begin(), names.end());
  }
  std::vector<ResumeDoc> docs;
  docs.reserve(names.size());
  LoadOptions opts = options;
  opts.base_dir = dir;
  for (const auto& n : names) docs.push_back(load_document_file(dir / n, opts));
  if (docs.empty()) fail(ErrorKind::kValidation, "corpus " + dir.string() + " contains no documents");
  return docs;
}

}  // namespace eru
