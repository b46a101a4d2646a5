// Operator-facing labels. Spanish is the default (the field deployments it
// mirrors run in Spanish); English is a toggle.

import type { Banner } from "./state.js";

export type Language = "es" | "en";

const LABELS: Record<Language, Record<Banner, string>> = {
  es: {
    none: "SIN ESCORPION",
    safe: "NO PELIGROSO",
    danger: "PELIGROSO",
    uncertain: "INCIERTO",
    offline: "SIN CONEXION",
  },
  en: {
    none: "NO SCORPION",
    safe: "NOT DANGEROUS",
    danger: "DANGEROUS",
    uncertain: "UNCERTAIN",
    offline: "OFFLINE",
  },
};

export function bannerLabel(state: Banner, lang: Language = "es"): string {
  return LABELS[lang][state];
}
