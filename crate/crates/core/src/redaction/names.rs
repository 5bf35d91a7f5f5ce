//! Name dictionary shared by the default NAME rule and the synthetic
//! identity generators. Entries avoid common English words.

pub const FIRST_NAMES: &[&str] = &[
    "Alice", "Beatrice", "Camille", "Dmitri", "Esther", "Farid", "Gabrielle", "Hiroshi",
    "Ingrid", "Jasmine", "Kwame", "Leila", "Mateo", "Nadia", "Oluwaseun", "Priya", "Quentin",
    "Rosalind", "Santiago", "Tatiana", "Ulrich", "Valentina", "Ximena", "Yusuf", "Zofia",
    "Anouk", "Bastien", "Chidi", "Delphine", "Emeka",
];

pub const LAST_NAMES: &[&str] = &[
    "Tremblay", "Gagnon", "Bouchard", "Gauthier", "Morin", "Lavoie", "Fortin", "Nguyen",
    "Okafor", "Haddad", "Kowalski", "Fernandes", "Ivanova", "Lindqvist", "Moreau", "Petrova",
    "Sato", "Achterberg", "Delacroix", "Venkataraman", "Abernathy", "Castellanos", "Duchesne",
    "Esposito", "Fitzgerald",
];

pub fn default_dictionary() -> Vec<String> {
    FIRST_NAMES
        .iter()
        .chain(LAST_NAMES)
        .map(|s| s.to_string())
        .collect()
}
