#include <sstream>

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "dogiqa/aggregate.hpp"
#include "dogiqa/cli.hpp"
#include "dogiqa/harness.hpp"
#include "dogiqa/maskproc.hpp"
#include "dogiqa/metrics.hpp"
#include "dogiqa/prompting.hpp"

namespace py = pybind11;
using namespace dogiqa;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

Image image_from_array(const U8Array& a) {
  if (a.ndim() == 2) {
    Image img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), 1);
    std::copy(a.data(), a.data() + a.size(), img.data.begin());
    return img;
  }
  if (a.ndim() != 3) throw py::value_error("image must be HxW or HxWxC uint8");
  Image img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2)));
  std::copy(a.data(), a.data() + a.size(), img.data.begin());
  return img;
}

U8Array image_to_array(const Image& img) {
  U8Array out({img.height, img.width, img.channels});
  std::copy(img.data.begin(), img.data.end(), out.mutable_data());
  return out;
}

Bitmap bitmap_from_array(const py::array_t<bool, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw py::value_error("mask must be a 2-D boolean array");
  Bitmap b(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  for (py::ssize_t i = 0; i < a.size(); ++i) b.bits[i] = a.data()[i] ? 1 : 0;
  return b;
}

py::array_t<bool> bitmap_to_array(const Bitmap& b) {
  py::array_t<bool> out({b.height, b.width});
  auto* p = out.mutable_data();
  for (std::size_t i = 0; i < b.bits.size(); ++i) p[i] = b.bits[i] != 0;
  return out;
}

// Scorer that calls back into Python; safe to use from worker threads.
class PyScorer : public ScorerBackend {
 public:
  PyScorer(std::string id, py::function fn) : id_(std::move(id)), fn_(std::move(fn)) {}
  ~PyScorer() override {
    py::gil_scoped_acquire gil;
    fn_ = py::function();
  }
  std::string backend_id() const override { return id_; }
  std::string score(const Image& pixels, const PromptPair& prompt) override {
    py::gil_scoped_acquire gil;
    return fn_(image_to_array(pixels), prompt.system_text, prompt.user_text).cast<std::string>();
  }

 private:
  std::string id_;
  py::function fn_;
};

py::dict verdict_dict(const ImageVerdict& v) {
  py::dict d;
  d["image_id"] = v.image_id;
  d["s_global"] = v.s_global;
  d["s_local"] = v.s_local;
  d["s_seg"] = v.s_seg;
  d["s_dog"] = v.s_dog;
  d["mask_count"] = v.mask_count;
  return d;
}

std::string json_text(const nlohmann::json& j) { return j.dump(); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Segmentation-guided, training-free image quality assessment";

  py::register_exception<Error>(m, "DogIQAError", PyExc_ValueError);

  py::enum_<CropMode>(m, "CropMode")
      .value("BBOX", CropMode::BBox)
      .value("MASK", CropMode::MaskZeroPad)
      .value("WHOLE", CropMode::WholeOnly)
      .value("BBOX_PLUS_WHOLE", CropMode::BBoxPlusWhole);
  py::enum_<AggMode>(m, "AggMode").value("AREA", AggMode::AreaWeighted).value("MEAN", AggMode::Mean);
  py::enum_<StandardForm>(m, "StandardForm")
      .value("NUMBER", StandardForm::Number)
      .value("WORD", StandardForm::Word)
      .value("SENTENCE", StandardForm::Sentence);

  py::class_<AggregationConfig>(m, "Config")
      .def(py::init([](int k) { return default_config(k); }), py::arg("k_levels") = 7)
      .def_readwrite("k_levels", &AggregationConfig::k_levels)
      .def_readwrite("area_threshold_frac", &AggregationConfig::area_threshold_frac)
      .def_readwrite("c_max", &AggregationConfig::c_max)
      .def_readwrite("crop_mode", &AggregationConfig::crop_mode)
      .def_readwrite("agg_mode", &AggregationConfig::agg_mode)
      .def_readwrite("seg_score_enabled", &AggregationConfig::seg_score_enabled)
      .def_readwrite("standard_form", &AggregationConfig::standard_form)
      .def_readwrite("word_standard", &AggregationConfig::word_standard)
      .def("validate", &AggregationConfig::validate)
      .def("to_json", [](const AggregationConfig& c) { return json_text(config_to_json(c)); });

  py::class_<Mask>(m, "Mask")
      .def(py::init([](const std::string& id, py::array_t<bool, py::array::c_style | py::array::forcecast> a) {
             return Mask::from_bitmap(id, bitmap_from_array(a));
           }),
           py::arg("id"), py::arg("bitmap"))
      .def_readonly("id", &Mask::id)
      .def_readonly("area", &Mask::area)
      .def_readonly("rle", &Mask::rle)
      .def_property_readonly("bbox",
                             [](const Mask& mk) {
                               return py::make_tuple(mk.bbox.row_min, mk.bbox.col_min, mk.bbox.row_max,
                                                     mk.bbox.col_max);
                             })
      .def("to_array", [](const Mask& mk) { return bitmap_to_array(mk.decode()); })
      .def("__repr__", [](const Mask& mk) { return "<Mask " + mk.id + " area=" + std::to_string(mk.area) + ">"; });

  m.def(
      "rle_encode",
      [](py::array_t<bool, py::array::c_style | py::array::forcecast> a) { return rle_encode(bitmap_from_array(a)); },
      "Column-major run lengths, starting with a run of zeros.");
  m.def(
      "rle_decode",
      [](const std::vector<std::uint32_t>& counts, int h, int w) { return bitmap_to_array(rle_decode(h, w, counts)); },
      py::arg("counts"), py::arg("height"), py::arg("width"));

  m.def(
      "process_masks",
      [](const std::vector<Mask>& masks, int height, int width, const AggregationConfig& cfg) {
        MaskSet set;
        set.image.height = height;
        set.image.width = width;
        set.masks = masks;
        return process_masks(set, cfg).masks;
      },
      py::arg("masks"), py::arg("height"), py::arg("width"), py::arg("config"),
      "Drops masks below the area threshold and appends the uncovered remainder.");
  m.def(
      "extract_subimage",
      [](const U8Array& image, const Mask& mask, CropMode mode) {
        return image_to_array(extract_subimage(image_from_array(image), mask, mode).pixels);
      },
      py::arg("image"), py::arg("mask"), py::arg("mode") = CropMode::BBox);

  m.def("preset_labels", &preset_word_labels, py::arg("k_levels"));
  m.def(
      "build_prompt",
      [](const AggregationConfig& cfg) {
        const auto p = build_prompt(Standard::from_config(cfg));
        return py::make_tuple(p.system_text, p.user_text);
      },
      py::arg("config"), "Returns (system_prompt, user_prompt).");
  m.def(
      "parse_score",
      [](const std::string& text, int k) {
        const auto r = parse_score(text, k);
        return py::make_tuple(r.score, r.parse_status == ParseStatus::Parsed);
      },
      py::arg("text"), py::arg("k_levels") = 7, "Returns (score, parsed).");

  m.def(
      "area_weights", [](const std::vector<std::int64_t>& areas) { return area_weights(areas); }, py::arg("areas"));
  m.def(
      "local_score",
      [](const std::vector<int>& scores, const std::vector<double>& weights, AggMode mode) {
        return local_score(scores, weights, mode);
      },
      py::arg("scores"), py::arg("weights"), py::arg("mode") = AggMode::AreaWeighted);
  m.def("seg_score", &seg_score, py::arg("mask_count"), py::arg("config"));
  m.def(
      "final_score",
      [](double g, double l, double s, const AggregationConfig& cfg) { return final_score(g, l, s, cfg).s_dog; },
      py::arg("s_global"), py::arg("s_local"), py::arg("s_seg"), py::arg("config"));

  m.def(
      "srcc", [](const std::vector<double>& x, const std::vector<double>& y) { return srcc(x, y); }, py::arg("x"),
      py::arg("y"));
  m.def(
      "plcc", [](const std::vector<double>& x, const std::vector<double>& y) { return plcc(x, y); }, py::arg("x"),
      py::arg("y"));
  m.def(
      "quantize_mos",
      [](double s, const std::vector<double>& mos, int k) { return quantize_mos(s, MosVector::from_values(mos), k); },
      py::arg("value"), py::arg("mos"), py::arg("k_levels"));
  m.def(
      "quantization_upper_bound",
      [](const std::vector<double>& mos, int k) {
        const auto ub = quantization_upper_bound(MosVector::from_values(mos), k);
        py::dict d;
        d["k_levels"] = ub.k_levels;
        d["srcc"] = ub.srcc;
        d["plcc"] = ub.plcc;
        d["avg"] = ub.avg;
        return d;
      },
      py::arg("mos"), py::arg("k_levels"));

  m.def(
      "evaluate",
      [](const std::filesystem::path& manifest_path, const AggregationConfig& cfg, py::function scorer,
         const std::string& scorer_id, const std::optional<std::filesystem::path>& masks_dir,
         const std::filesystem::path& cache_dir, int jobs) {
        const auto manifest = ingest_manifest(manifest_path);
        PyScorer backend(scorer_id, std::move(scorer));
        std::unique_ptr<MaskDirSource> masks;
        if (masks_dir) masks = std::make_unique<MaskDirSource>(*masks_dir);
        EvalReport report;
        {
          py::gil_scoped_release release;
          ScoreCache cache(cache_dir);
          PipelineOptions opts;
          opts.jobs = jobs;
          report = run_pipeline(manifest, cfg, backend, masks.get(), cache, opts);
        }
        py::dict out;
        py::list images;
        for (const auto& r : report.images) {
          auto d = verdict_dict(r.verdict);
          d["mos"] = r.mos;
          images.append(d);
        }
        out["images"] = images;
        out["srcc"] = report.srcc;
        out["plcc"] = report.plcc;
        out["n_failed"] = report.n_failed();
        out["report_json"] = report.to_json().dump();
        return out;
      },
      py::arg("manifest"), py::arg("config"), py::arg("scorer"), py::arg("scorer_id") = "python",
      py::arg("masks_dir") = std::nullopt, py::arg("cache_dir") = std::filesystem::path(".dogiqa_cache"),
      py::arg("jobs") = 1,
      "Scores every manifest image with `scorer(image, system_prompt, user_prompt) -> str`.");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool in-process. Returns (exit_code, stdout, stderr).");
}
