public class Util {
    private String mCache;

    public static int twice(int number) {
        <start>return num * 2;<end>
    }
}
