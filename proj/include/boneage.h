#ifndef BONEAGE_H
#define BONEAGE_H

/* Bone-age estimation toolkit: polygon-annotated hand segmentation, a small
 * convolutional regressor with a ridge output layer, and gradient-weighted
 * activation heatmaps. This header is the stable C surface of the shared
 * library; the command-line tool is a thin shim over ba_run().
 *
 * Conventions:
 *   - every fallible call returns a ba_status; BA_OK is zero
 *   - on failure, ba_last_error() holds a message for the calling thread
 *   - objects returned through out-parameters are owned by the caller and
 *     released with the matching *_free function
 *   - pixel buffers are row-major doubles in [0,1]
 */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ba_status {
  BA_OK = 0,
  BA_E_PARSE = 1,       /* malformed document, CSV, PGM, or checkpoint */
  BA_E_REFERENCE = 2,   /* id points at a record that does not exist */
  BA_E_GEOMETRY = 3,    /* degenerate polygon (fewer than three vertices) */
  BA_E_UNSUPPORTED = 4, /* annotation shape outside the polygon subset */
  BA_E_SHAPE = 5,       /* array dimensions disagree */
  BA_E_CONFIG = 6,      /* parameter outside its documented range */
  BA_E_SINGULAR = 7,    /* linear system too ill-conditioned to solve */
  BA_E_DOMAIN = 8,      /* value outside the mathematical domain */
  BA_E_IO = 9,          /* file could not be read or written */
  BA_E_ARGUMENT = 10,   /* null pointer or bad extent at this C boundary */
  BA_E_INTERNAL = 11    /* unexpected failure; see ba_last_error() */
} ba_status;

/* Message describing the calling thread's most recent failure, or "" after
 * a success. The pointer stays valid until this thread's next library call. */
const char* ba_last_error(void);

/* Library version as "major.minor.patch". Static storage; do not free. */
const char* ba_version(void);

/* Releases a string returned through a char** out-parameter. Null is a
 * no-op. */
void ba_text_free(char* text);

/* Runs the full command-line interface in process. argv[0] is the program
 * name. Returns the would-be exit code: 0 success, 1 runtime failure,
 * 2 usage error. Diagnostics go to stderr, results to files and stdout. */
int ba_run(int argc, const char* const* argv);

/* ---------------------------------------------------------------- datasets
 * A dataset bundles image records, polygon annotations, and categories.
 * Parsing validates every structural invariant (unique ids, resolvable
 * references, polygons with at least three in-bounds vertices).
 */
typedef struct ba_dataset ba_dataset;

/* COCO instance document. Segmentations may be the standard nested
 * [[x1,y1,...]] form with a single part, or a flat [x1,y1,...] list. */
ba_status ba_dataset_parse_coco(const char* json_text, ba_dataset** out);

/* VIA-2 project export; polygon regions only. Image dimensions become the
 * smallest integer frame containing each image's polygons. */
ba_status ba_dataset_parse_via(const char* json_text, ba_dataset** out);

/* Canonical COCO JSON (sorted keys, LF line endings, trailing newline).
 * The same dataset always serializes to identical bytes. */
ba_status ba_dataset_to_coco(const ba_dataset* ds, char** out_text);

/* Record counts, or -1 when ds is null. */
int ba_dataset_image_count(const ba_dataset* ds);
int ba_dataset_annotation_count(const ba_dataset* ds);

void ba_dataset_free(ba_dataset* ds);

/* ------------------------------------------------------------------ models
 * A model is a checkpointed convolutional regressor. Checkpoints embed the
 * architecture, so loading needs no side channel.
 */
typedef struct ba_model ba_model;

ba_status ba_model_load(const char* path, ba_model** out);
ba_status ba_model_save(const ba_model* m, const char* path);

/* Native input frame, or -1 when m is null. */
int ba_model_input_width(const ba_model* m);
int ba_model_input_height(const ba_model* m);

/* Total trainable scalar count, or -1 when m is null. */
int64_t ba_model_parameter_count(const ba_model* m);

/* Predicted age in months for one grayscale image. Images not matching the
 * native frame are resampled bilinearly first. */
ba_status ba_model_predict(const ba_model* m, const double* pixels, int width,
                           int height, double* out_months);

/* Number of convolution activations addressable as heatmap layers, or -1
 * when m is null. */
int ba_model_layer_count(const ba_model* m);

/* Spatial extent of the heatmap produced at the given layer. Layer -1 means
 * the last convolution. */
ba_status ba_model_heatmap_extent(const ba_model* m, int layer, int* out_width,
                                  int* out_height);

/* Gradient-weighted activation map for one image, averaged over `samples`
 * noise-perturbed copies (noise_sd is the Gaussian sigma in intensity
 * units; samples=1 with noise_sd=0 is the plain single-pass map). Values
 * land in out_values, row-major, sized per ba_model_heatmap_extent; they
 * lie in [0,1] with maximum exactly 1 unless identically zero. */
ba_status ba_model_heatmap(const ba_model* m, const double* pixels, int width,
                           int height, int layer, int samples, double noise_sd,
                           uint64_t seed, double* out_values);

void ba_model_free(ba_model* m);

/* ------------------------------------------------------------------- ridge
 * Standalone penalized least squares on a dense design matrix: minimize
 * ||y - X b||^2 + lambda ||b||^2. x is row-major with n rows of p columns.
 */

/* Closed-form fit. out_beta receives p coefficients. With standardize
 * nonzero, columns are scaled to unit root-mean-square before fitting and
 * the coefficients are mapped back to the original column scale. */
ba_status ba_ridge_fit(const double* x, const double* y, int n, int p,
                       double lambda, int standardize, double* out_beta);

/* k-fold cross-validation over a grid of candidate penalties. Writes the
 * winner to out_best_lambda; when out_mean_mse is non-null it receives one
 * mean held-out MSE per grid entry. Ties prefer the larger penalty. */
ba_status ba_ridge_cv(const double* x, const double* y, int n, int p,
                      const double* grid, int grid_len, int folds,
                      uint64_t seed, double* out_best_lambda,
                      double* out_mean_mse);

#ifdef __cplusplus
}
#endif

#endif /* BONEAGE_H */
