#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "kryptolab/attacks.hpp"
#include "kryptolab/bench.hpp"
#include "kryptolab/defences.hpp"
#include "kryptolab/error.hpp"
#include "kryptolab/imagekit.hpp"
#include "kryptolab/metrics.hpp"
#include "kryptolab/network.hpp"
#include "kryptolab/pnm.hpp"

namespace py = pybind11;
using namespace kryptolab;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using MaskArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

// (H, W) or (H, W, C) float array <-> Image.
Image to_image(const Array& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw Error(ErrorCode::DimensionMismatch, "expected an (H, W) or (H, W, C) array");
  Image img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1);
  std::copy(a.data(), a.data() + a.size(), img.data.begin());
  return img;
}

Array from_image(const Image& img) {
  Array out({img.height, img.width, img.channels});
  std::copy(img.data.begin(), img.data.end(), out.mutable_data());
  return out;
}

BinaryMask to_mask(const MaskArray& a) {
  if (a.ndim() != 2) throw Error(ErrorCode::DimensionMismatch, "expected an (H, W) mask");
  BinaryMask m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  for (py::ssize_t i = 0; i < a.size(); ++i) m.data[i] = a.data()[i] ? 1 : 0;
  return m;
}

py::array_t<bool> from_mask(const BinaryMask& m) {
  py::array_t<bool> out({m.height, m.width});
  std::transform(m.data.begin(), m.data.end(), out.mutable_data(), [](std::uint8_t v) { return v != 0; });
  return out;
}

std::vector<Image> to_images(const std::vector<Array>& xs) {
  std::vector<Image> out;
  out.reserve(xs.size());
  for (const auto& a : xs) out.push_back(to_image(a));
  return out;
}

py::dict result_dict(const attacks::AttackResult& r) {
  py::dict d;
  d["adversarial"] = from_image(r.adversarial);
  d["linf"] = r.linf;
  d["l2_percent"] = r.l2_percent;
  d["iterations_used"] = r.iterations_used;
  d["success"] = r.success;
  d["elapsed"] = r.elapsed;
  return d;
}

py::dict row_dict(const bench::ReportRow& r) {
  py::dict d;
  d["attack"] = r.attack;
  d["defence"] = r.defence;
  d["network"] = r.network;
  d["trial"] = r.trial;
  d["clean_accuracy"] = r.clean_accuracy;
  d["adv_accuracy"] = r.adv_accuracy;
  d["clean_auc"] = r.clean_auc;
  d["adv_auc"] = r.adv_auc;
  d["pert_mean"] = r.pert_mean;
  d["pert_worst"] = r.pert_worst;
  d["linf_max"] = r.linf_max;
  d["seconds_per_sample"] = r.seconds_per_sample;
  d["samples"] = r.samples;
  d["failures"] = r.failures;
  return d;
}

}  // namespace

PYBIND11_MODULE(kryptolab, m) {
  m.doc() = "Image RoI extraction, a small autodiff CNN, L-infinity attacks, defences and metrics";

  // Leaked on purpose: the type lives as long as the interpreter.
  static PyObject* error_type = py::exception<Error>(m, "KryptolabError", PyExc_RuntimeError).release().ptr();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type)(e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error_type, exc.ptr());
    }
  });

  // imagekit
  m.def("otsu_threshold",
        [](const Array& img, int bins) {
          return imagekit::otsu_threshold(imagekit::compute_histogram(imagekit::to_grayscale(to_image(img), bins)));
        },
        py::arg("image"), py::arg("bins") = 256, "Otsu threshold on the quantized grayscale image");
  m.def("dilate", [](const MaskArray& mask, int k) { return from_mask(imagekit::dilate(to_mask(mask), imagekit::Kernel::box(k))); },
        py::arg("mask"), py::arg("kernel_size") = 5);
  m.def("trace_borders",
        [](const MaskArray& mask) {
          py::list out;
          for (const auto& c : imagekit::trace_borders(to_mask(mask))) {
            py::dict d;
            std::vector<std::pair<int, int>> pts;
            for (const auto& p : c.points) pts.emplace_back(p.row, p.col);
            d["points"] = pts;
            d["kind"] = c.kind == imagekit::BorderKind::Outer ? "outer" : "hole";
            d["parent"] = c.parent ? py::cast(*c.parent) : py::none();
            d["label"] = c.label;
            out.append(d);
          }
          return out;
        },
        py::arg("mask"));
  m.def("roi_mask",
        [](const Array& img, int kernel_size, bool invert) {
          imagekit::RoiOptions o;
          o.kernel_size = kernel_size;
          o.invert = invert;
          return from_mask(imagekit::roi_mask(to_image(img), o).mask);
        },
        py::arg("image"), py::arg("kernel_size") = 5, py::arg("invert") = false);
  m.def("apply_mask",
        [](const Array& img, const MaskArray& mask) {
          return from_image(imagekit::apply_mask(to_image(img), RoIMask::from_mask(to_mask(mask))));
        },
        py::arg("image"), py::arg("mask"));
  m.def("read_image", [](const std::filesystem::path& p) { return from_image(pnm::read_image(p)); });
  m.def("write_image", [](const std::filesystem::path& p, const Array& img) { pnm::write_image(p, to_image(img)); });

  // gradnet
  using gradnet::LayerSpec;
  py::class_<LayerSpec>(m, "LayerSpec")
      .def_static("conv", [](int out, int k, int stride, bool valid) {
        return LayerSpec::conv(out, k, stride, valid ? gradnet::Padding::Valid : gradnet::Padding::Same);
      }, py::arg("out_channels"), py::arg("kernel"), py::arg("stride") = 1, py::arg("valid") = false)
      .def_static("relu", &LayerSpec::relu)
      .def_static("maxpool", &LayerSpec::maxpool, py::arg("window") = 2, py::arg("stride") = 2)
      .def_static("dropout", &LayerSpec::dropout, py::arg("rate"))
      .def_static("flatten", &LayerSpec::flatten)
      .def_static("dense", &LayerSpec::dense, py::arg("width"))
      .def_static("sigmoid", &LayerSpec::sigmoid)
      .def_static("softmax", &LayerSpec::softmax, py::arg("temperature") = 1.0)
      .def_property_readonly("kind", [](const LayerSpec& s) { return gradnet::to_string(s.kind); })
      .def("__repr__", [](const LayerSpec& s) { return "<LayerSpec " + gradnet::to_string(s.kind) + ">"; });

  m.def("reference_cnn_specs", &gradnet::reference_cnn_specs);
  m.def("scaled_cnn_specs", &gradnet::scaled_cnn_specs, py::arg("divisor"));
  m.def("small_cnn_specs", &bench::small_cnn_specs);
  m.def("count_parameters",
        [](const std::vector<LayerSpec>& specs, std::tuple<int, int, int> chw) {
          return gradnet::count_parameters(specs, {std::get<0>(chw), std::get<1>(chw), std::get<2>(chw)});
        },
        py::arg("specs"), py::arg("input_chw"));

  using gradnet::Network;
  py::class_<Network>(m, "Network")
      .def(py::init([](const std::vector<LayerSpec>& specs, std::tuple<int, int, int> chw, std::uint64_t seed) {
             return Network::build(specs, {std::get<0>(chw), std::get<1>(chw), std::get<2>(chw)}, seed);
           }),
           py::arg("specs"), py::arg("input_chw"), py::arg("seed") = 0)
      .def_property_readonly("parameter_count", &Network::parameter_count)
      .def_property_readonly("specs", &Network::specs)
      .def_property("train_mode", [](const Network& n) { return n.mode() == gradnet::Mode::Train; },
                    [](Network& n, bool t) { n.set_mode(t ? gradnet::Mode::Train : gradnet::Mode::Eval); })
      .def("forward", [](const Network& n, const Array& x) { return n.forward(to_image(x)); })
      .def("logits", [](const Network& n, const Array& x) { return n.logits(to_image(x)); })
      .def("predict", [](const Network& n, const Array& x) { return n.predict(to_image(x)); })
      .def("score", [](const Network& n, const Array& x) { return n.score(to_image(x)); })
      .def("loss", [](const Network& n, const Array& x, int y) { return n.loss(to_image(x), y); })
      .def("input_gradient",
           [](const Network& n, const Array& x, int y) {
             const Image img = to_image(x);
             Image g(img.height, img.width, img.channels);
             g.data = n.input_gradient(img, y).data;
             return from_image(g);
           })
      .def("train",
           [](Network& n, const std::vector<Array>& xs, const std::vector<int>& ys, int epochs, int batch, double lr,
              std::uint64_t seed, double clip_norm) {
             gradnet::TrainConfig c;
             c.clip_norm = clip_norm;
             c.epochs = epochs;
             c.batch_size = batch;
             c.learning_rate = lr;
             c.seed = seed;
             std::vector<double> losses;
             for (const auto& s : gradnet::train(n, to_images(xs), ys, c)) losses.push_back(s.loss);
             return losses;
           },
           py::arg("images"), py::arg("labels"), py::arg("epochs") = 10, py::arg("batch_size") = 32,
           py::arg("learning_rate") = 0.05, py::arg("seed") = 0, py::arg("clip_norm") = 0.0)
      .def("save", [](const Network& n, const std::filesystem::path& p) { gradnet::save(n, p); })
      .def_static("load", [](const std::filesystem::path& p) { return gradnet::load(p); });

  // attacks
  py::class_<attacks::AttackConfig>(m, "AttackConfig")
      .def(py::init([](double eps, int iters, std::optional<double> alpha, double omega, double mu0, double eta,
                       int kernel, std::uint64_t seed) {
             attacks::AttackConfig c;
             c.epsilon = eps;
             c.iterations = iters;
             c.alpha = alpha;
             c.decay_weight = omega;
             c.initial_decay = mu0;
             c.overshoot = eta;
             c.kernel_size = kernel;
             c.seed = seed;
             c.validate();
             return c;
           }),
           py::arg("epsilon") = 0.03, py::arg("iterations") = 10, py::arg("alpha") = py::none(),
           py::arg("decay_weight") = 0.5, py::arg("initial_decay") = 0.5, py::arg("overshoot") = 0.02,
           py::arg("kernel_size") = 5, py::arg("seed") = 0)
      .def_readwrite("epsilon", &attacks::AttackConfig::epsilon)
      .def_readwrite("iterations", &attacks::AttackConfig::iterations)
      .def_readwrite("alpha", &attacks::AttackConfig::alpha)
      .def_readwrite("decay_weight", &attacks::AttackConfig::decay_weight)
      .def_readwrite("initial_decay", &attacks::AttackConfig::initial_decay)
      .def_readwrite("overshoot", &attacks::AttackConfig::overshoot)
      .def_readwrite("kernel_size", &attacks::AttackConfig::kernel_size)
      .def_readwrite("seed", &attacks::AttackConfig::seed);

  m.def("attack",
        [](const std::string& kind, const Network& net, const Array& x, int y, const attacks::AttackConfig& cfg) {
          return result_dict(attacks::run_attack(attacks::parse_attack(kind), net, to_image(x), y, cfg));
        },
        py::arg("kind"), py::arg("net"), py::arg("image"), py::arg("label"), py::arg("config"),
        "Run fgsm, ifgsm, pgd, mifgsm, deepfool, kryptonite or kryptonite_masked");
  m.def("kryptonite",
        [](const Network& net, const Array& x, int y, const MaskArray& roi, const attacks::AttackConfig& cfg) {
          return result_dict(attacks::kryptonite(net, to_image(x), y, RoIMask::from_mask(to_mask(roi)), cfg));
        },
        py::arg("net"), py::arg("image"), py::arg("label"), py::arg("roi"), py::arg("config"));

  // defences
  m.def("saliency_map", [](const Network& net, const Array& x) { return from_image(defences::saliency_map(net, to_image(x))); });
  m.def("pixel_deflect",
        [](const Array& x, const Array& saliency, int deflections, int window, bool denoise, std::uint64_t seed) {
          defences::DefenceConfig c;
          c.kind = defences::DefenceKind::PixelDeflect;
          c.deflections = deflections;
          c.window = window;
          c.denoise = denoise;
          c.seed = seed;
          return from_image(defences::pixel_deflect(to_image(x), to_image(saliency), c));
        },
        py::arg("image"), py::arg("saliency"), py::arg("deflections") = 120, py::arg("window") = 10,
        py::arg("denoise") = true, py::arg("seed") = 0);
  m.def("median3x3", [](const Array& x) { return from_image(defences::median3x3(to_image(x))); });

  // metrics
  m.def("lp_norm", [](const Array& a, const Array& b, double p) { return metrics::lp_norm(to_image(a), to_image(b), p); },
        py::arg("a"), py::arg("b"), py::arg("p"));
  m.def("perturbation_percent",
        [](const Array& x, const Array& adv) { return metrics::perturbation_percent(to_image(x), to_image(adv)); });
  m.def("accuracy", &metrics::accuracy, py::arg("scores"), py::arg("labels"), py::arg("threshold") = 0.5);
  m.def("roc_auc",
        [](const std::vector<double>& scores, const std::vector<int>& labels) {
          if (scores.size() != labels.size()) throw Error(ErrorCode::DimensionMismatch, "scores and labels differ in length");
          std::vector<metrics::ScoredSample> s;
          for (std::size_t i = 0; i < scores.size(); ++i) s.push_back({scores[i], labels[i]});
          return metrics::roc_auc(s);
        },
        py::arg("scores"), py::arg("labels"));
  m.def("pearson", &metrics::pearson);

  // bench
  m.def("synth_samples",
        [](int n, int size, std::uint64_t seed, int channels) {
          py::list out;
          for (const auto& s : bench::synth_samples(n, size, seed, channels))
            out.append(py::make_tuple(from_image(s.image), s.label, from_mask(s.blob)));
          return out;
        },
        py::arg("n"), py::arg("size") = 32, py::arg("seed") = 0, py::arg("channels") = 1);
  m.def("run_experiment",
        [](const std::string& json_text) {
          py::list out;
          for (const auto& r : bench::run_experiment(bench::parse_config(json_text))) out.append(row_dict(r));
          return out;
        },
        py::arg("config_json"), "Run an experiment described by a JSON config; returns report rows");
  m.def("sweep",
        [](const std::string& json_text) {
          py::list out;
          for (const auto& p : bench::sweep(bench::parse_config(json_text))) {
            py::dict d;
            d["attack"] = p.attack;
            d["axis"] = bench::to_string(p.axis);
            d["value"] = p.value;
            d["auc"] = p.auc;
            d["accuracy"] = p.accuracy;
            d["pert_mean"] = p.pert_mean;
            out.append(d);
          }
          return out;
        },
        py::arg("config_json"));
}
