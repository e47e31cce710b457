/**
 * Deterministic single-pass inpainting.
 *
 * Pipeline per request (images arrive display-domain; the caller owns
 * gamma): encode the composited image to the latent grid, keep only its
 * high-frequency bands (structure without the pasted colors, skippable via
 * the ablation flag), scale by sqrt(alphaBar) at the fixed final timestep
 * with the noise term held at zero, concatenate with the x8-downscaled
 * mask and the masked-image latent, run the denoiser once, recover the
 * clean latent, decode, and composite back so pixels outside the mask pass
 * through bitwise. No randomness anywhere: identical requests produce
 * identical responses.
 */

import { highFreqExtract } from "./pyramid";
import { InpaintRequest } from "./protocol";
import { ModelBundle, downscaleMask } from "./model";
import { SQRT_ALPHA_BAR_T, recoverLatent } from "./scheduler";
import { Plane, clonePlane, concatChannels, makePlane } from "./tensor";

const clamp01 = (v: number) => Math.min(1, Math.max(0, v));

export function inpaintSinglePass(req: InpaintRequest, model: ModelBundle): Plane {
  const { image, mask, config } = req;

  const maskedImage = clonePlane(image);
  for (let i = 0; i < mask.data.length; i++) {
    if (mask.data[i] > 0.5) {
      maskedImage.data[3 * i] = 0;
      maskedImage.data[3 * i + 1] = 0;
      maskedImage.data[3 * i + 2] = 0;
    }
  }

  const zStar = model.codec.encode(image);
  const levels = Math.min(config.pyramidLevels, maxLevelsFor(zStar));
  const zStructure = config.laplacian ? highFreqExtract(zStar, levels) : zStar;

  const zT = makePlane(zStar.height, zStar.width, zStar.channels);
  for (let i = 0; i < zT.data.length; i++) {
    zT.data[i] = SQRT_ALPHA_BAR_T * zStructure.data[i];
  }

  const mPrime = downscaleMask(mask, zStar.height, zStar.width);
  const zMasked = model.codec.encode(maskedImage);
  const zCombined = concatChannels([zT, mPrime, zMasked]);

  const eps = model.denoiser.predict(zCombined);
  const zHat = makePlane(zStar.height, zStar.width, zStar.channels);
  for (let i = 0; i < zHat.data.length; i++) {
    zHat.data[i] = recoverLatent(zT.data[i], eps.data[i], model.x0Formula);
  }

  const decoded = model.codec.decode(zHat, image.height, image.width);
  const out = clonePlane(image);
  for (let i = 0; i < mask.data.length; i++) {
    if (mask.data[i] > 0.5) {
      out.data[3 * i] = clamp01(decoded.data[3 * i]);
      out.data[3 * i + 1] = clamp01(decoded.data[3 * i + 1]);
      out.data[3 * i + 2] = clamp01(decoded.data[3 * i + 2]);
    }
  }
  return out;
}

function maxLevelsFor(latent: Plane): number {
  const side = Math.min(latent.height, latent.width);
  let levels = 1;
  while (2 ** (levels + 1) <= side && levels < 6) levels++;
  return levels;
}
