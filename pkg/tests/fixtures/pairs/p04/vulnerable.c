int grow_level_table(struct scanner *sc, unsigned int level)
{
    size_t bytes;

    if (level >= sc->levels.cap) {
        bytes = (sc->levels.cap += 16) * sizeof(*sc->levels.items);
        sc->levels.items = (sc->levels.items == NULL) ?
            malloc(bytes) : realloc(sc->levels.items, bytes);
        if (sc->levels.items == NULL) {
            report_oom(sc, bytes);
            return -1;
        }
    }
    sc->levels.items[level].matched = 0;
    sc->levels.items[level].depth = level;
    return 0;
}
